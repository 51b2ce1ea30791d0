//! Potential-energy models and reaction coordinates.
//!
//! Models are immutable after construction and shared across chains.

mod alanine;
mod double_well;
mod three_atom;

pub use alanine::AlanineModel;
pub use double_well::DoubleWell;
pub use three_atom::{ThetaCoordinate, ThreeAtomModel};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use std::f64::consts::PI;

/// A microscopic configuration: a finite coordinate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration(Vec<f64>);

impl Configuration {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("coordinate {i} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Configuration {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Potential energy `V: R^d -> R`.
pub trait PotentialModel: Send + Sync {
    fn dimension(&self) -> usize;

    fn energy(&self, x: &[f64]) -> Result<f64>;

    /// Writes `∇V(x)` into `grad` and returns `V(x)`.
    fn energy_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<()> {
        self.energy_gradient(x, grad).map(|_| ())
    }
}

/// Value, gradient and Laplacian of a scalar reaction coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct RcEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub laplacian: f64,
}

impl RcEvaluation {
    pub fn grad_norm_sq(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum()
    }
}

/// Reaction coordinate `ξ: R^d -> R^n`. Both benchmark systems use `n = 1`,
/// which is the only output dimension the tables support.
pub trait ReactionCoordinate: Send + Sync {
    fn input_dimension(&self) -> usize;

    fn output_dimension(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Writes `∇ξ(x)` into `grad` and returns `ξ(x)`.
    fn value_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;

    fn laplacian(&self, x: &[f64]) -> Result<f64>;

    fn grad_norm_sq(&self, x: &[f64]) -> Result<f64> {
        let mut g = vec![0.0; self.input_dimension()];
        self.value_gradient(x, &mut g)?;
        Ok(g.iter().map(|v| v * v).sum())
    }

    fn evaluate(&self, x: &[f64]) -> Result<RcEvaluation> {
        let mut gradient = vec![0.0; self.input_dimension()];
        let value = self.value_gradient(x, &mut gradient)?;
        Ok(RcEvaluation {
            value,
            gradient,
            laplacian: self.laplacian(x)?,
        })
    }

    /// Whether `z` lies in the image `H` of the coordinate. Macroscopic
    /// proposals outside the image have zero target density.
    fn image_contains(&self, _z: f64) -> bool {
        true
    }
}

pub(crate) fn check_dimension(x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Dimension {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!("{what} is not finite")))
    }
}

/// Linear projection onto one coordinate. Serves as the identity coordinate
/// of the one-dimensional test family and as the `ψ` torsion of alanine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateProjection {
    dimension: usize,
    index: usize,
}

impl CoordinateProjection {
    pub fn new(dimension: usize, index: usize) -> Result<Self> {
        if index >= dimension {
            return Err(Error::InvalidParameter(format!(
                "projection index {index} out of range for dimension {dimension}"
            )));
        }
        Ok(Self { dimension, index })
    }

    pub fn identity() -> Self {
        Self {
            dimension: 1,
            index: 0,
        }
    }

    /// `ψ` of the six internal alanine coordinates.
    pub fn psi() -> Self {
        Self {
            dimension: 6,
            index: AlanineModel::PSI,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

impl ReactionCoordinate for CoordinateProjection {
    fn input_dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dimension(x, self.dimension)?;
        Ok(x[self.index])
    }

    fn value_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dimension(x, self.dimension)?;
        grad.fill(0.0);
        grad[self.index] = 1.0;
        Ok(x[self.index])
    }

    fn laplacian(&self, x: &[f64]) -> Result<f64> {
        check_dimension(x, self.dimension)?;
        Ok(0.0)
    }

    fn grad_norm_sq(&self, x: &[f64]) -> Result<f64> {
        check_dimension(x, self.dimension)?;
        Ok(1.0)
    }
}

/// How a chain picks its first configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// The model's reference minimum (right well where there are two).
    Equilibrium,
    /// The right well of the reaction coordinate.
    RightWell,
    /// Left or right well with equal probability.
    RandomWell,
}

impl InitMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "equilibrium" => Ok(Self::Equilibrium),
            "right_well" => Ok(Self::RightWell),
            "random_well" => Ok(Self::RandomWell),
            other => Err(Error::InvalidParameter(format!("unknown init mode `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Equilibrium => "equilibrium",
            Self::RightWell => "right_well",
            Self::RandomWell => "random_well",
        }
    }
}

/// A benchmark system: potential, reaction coordinate and the model-specific
/// knowledge the pipeline needs (node-local starts, reference marginals,
/// named observables).
#[derive(Debug, Clone)]
pub enum System {
    ThreeAtom {
        model: ThreeAtomModel,
        rc: ThetaCoordinate,
    },
    Alanine {
        model: AlanineModel,
        rc: CoordinateProjection,
    },
    DoubleWell {
        model: DoubleWell,
        rc: CoordinateProjection,
    },
}

impl System {
    pub fn three_atom(epsilon: f64) -> Result<Self> {
        Ok(Self::ThreeAtom {
            model: ThreeAtomModel::new(epsilon)?,
            rc: ThetaCoordinate,
        })
    }

    pub fn alanine() -> Self {
        Self::Alanine {
            model: AlanineModel::new(),
            rc: CoordinateProjection::psi(),
        }
    }

    pub fn double_well(height: f64) -> Result<Self> {
        Ok(Self::DoubleWell {
            model: DoubleWell::new(height)?,
            rc: CoordinateProjection::identity(),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ThreeAtom { .. } => "three_atom",
            Self::Alanine { .. } => "alanine",
            Self::DoubleWell { .. } => "double_well_1d",
        }
    }

    pub fn rc_name(&self) -> &'static str {
        match self {
            Self::ThreeAtom { .. } => "theta",
            Self::Alanine { .. } => "psi",
            Self::DoubleWell { .. } => "identity",
        }
    }

    pub fn potential(&self) -> &dyn PotentialModel {
        match self {
            Self::ThreeAtom { model, .. } => model,
            Self::Alanine { model, .. } => model,
            Self::DoubleWell { model, .. } => model,
        }
    }

    pub fn reaction_coordinate(&self) -> &dyn ReactionCoordinate {
        match self {
            Self::ThreeAtom { rc, .. } => rc,
            Self::Alanine { rc, .. } => rc,
            Self::DoubleWell { rc, .. } => rc,
        }
    }

    pub fn dimension(&self) -> usize {
        self.potential().dimension()
    }

    /// Default reaction-coordinate grid `(z_min, z_max, nodes)`.
    pub fn default_grid(&self) -> (f64, f64, usize) {
        match self {
            Self::ThreeAtom { .. } => (0.0, PI, 200),
            Self::Alanine { .. } => (-PI, PI, 200),
            Self::DoubleWell { .. } => (-2.5, 2.5, 201),
        }
    }

    /// Start of the biased precompute chain at grid node `z`: the model's
    /// minimum with the reaction coordinate set to `z`.
    pub fn node_start(&self, z: f64) -> Vec<f64> {
        match self {
            Self::ThreeAtom { .. } => vec![1.0, z.cos(), z.sin()],
            Self::Alanine { model, .. } => {
                let mut q = model.equilibrium().to_vec();
                q[AlanineModel::PSI] = z;
                q
            }
            Self::DoubleWell { .. } => vec![z],
        }
    }

    /// Reaction-coordinate value of the right well.
    pub fn right_well(&self) -> f64 {
        match self {
            Self::ThreeAtom { .. } => PI / 2.0 + ThreeAtomModel::DELTA_THETA,
            Self::Alanine { .. } => 0.0,
            Self::DoubleWell { .. } => 1.0,
        }
    }

    fn left_well(&self) -> f64 {
        match self {
            Self::ThreeAtom { .. } => PI / 2.0 - ThreeAtomModel::DELTA_THETA,
            Self::Alanine { .. } => 0.0,
            Self::DoubleWell { .. } => -1.0,
        }
    }

    pub fn initial_state(&self, mode: InitMode, rng: &mut RandomStream) -> Vec<f64> {
        let z = match mode {
            InitMode::Equilibrium | InitMode::RightWell => self.right_well(),
            InitMode::RandomWell => {
                if rng.uniform() < 0.5 {
                    self.left_well()
                } else {
                    self.right_well()
                }
            }
        };
        self.node_start(z)
    }

    /// Closed-form free energy of the reaction coordinate, up to a constant,
    /// where one is known.
    pub fn analytic_free_energy(&self, z: f64) -> Option<f64> {
        match self {
            Self::ThreeAtom { .. } => Some(ThreeAtomModel::free_energy(z)),
            Self::Alanine { model, .. } => Some(model.psi_free_energy(z)),
            Self::DoubleWell { model, .. } => Some(model.value(z)),
        }
    }

    /// Closed-form effective drift, where one is known.
    pub fn analytic_drift(&self, z: f64) -> Option<f64> {
        match self {
            Self::ThreeAtom { .. } => Some(ThreeAtomModel::drift(z)),
            Self::Alanine { model, .. } => Some(-model.psi_free_energy_derivative(z)),
            Self::DoubleWell { model, .. } => Some(-model.derivative(z)),
        }
    }

    pub fn supports_direct_reconstruction(&self) -> bool {
        matches!(self, Self::ThreeAtom { .. } | Self::DoubleWell { .. })
    }

    pub fn observable_names(&self) -> &'static [&'static str] {
        match self {
            Self::ThreeAtom { .. } => &["theta", "x_a", "r_c"],
            Self::Alanine { .. } => &["psi", "phi", "r_cc", "r_cn", "theta_ccn", "theta_cnc"],
            Self::DoubleWell { .. } => &["x"],
        }
    }

    pub fn default_observables(&self) -> &'static [&'static str] {
        match self {
            Self::ThreeAtom { .. } => &["theta"],
            Self::Alanine { .. } => &["psi", "phi"],
            Self::DoubleWell { .. } => &["x"],
        }
    }

    /// Index of a named observable, for use with [`System::observable`].
    pub fn observable_index(&self, name: &str) -> Option<usize> {
        self.observable_names().iter().position(|n| *n == name)
    }

    /// Value of observable `index` at `x`. Torsions are reduced to `(-π, π]`.
    pub fn observable(&self, index: usize, x: &[f64]) -> f64 {
        match self {
            Self::ThreeAtom { .. } => match index {
                0 => x[2].atan2(x[1]),
                1 => x[0],
                _ => x[1].hypot(x[2]),
            },
            Self::Alanine { .. } => match index {
                0 => wrap_angle(x[AlanineModel::PSI]),
                1 => wrap_angle(x[AlanineModel::PHI]),
                2 => x[0],
                3 => x[1],
                4 => x[2],
                _ => x[3],
            },
            Self::DoubleWell { .. } => x[0],
        }
    }
}

/// Reduces an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    r
}
