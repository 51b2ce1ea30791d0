use super::*;
use crate::diagnostics::{ks_critical_value, ks_distance, ks_effective_size, QuadratureCdf};
use crate::model::{System, ThreeAtomModel};
use crate::tables::{tables_from_free_energy, Grid};
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn flat_tables(drift: f64, lambda: f64) -> MacroTables {
    let g = Grid::new(-10.0, 10.0, 201).unwrap();
    tables_from_free_energy(g, |_| 0.0, move |_| drift, |_| 1.0, lambda, 1.0).unwrap()
}

fn dw_tables(h: f64, lambda: f64, beta: f64) -> MacroTables {
    let g = Grid::new(-3.0, 3.0, 601).unwrap();
    let v = move |z: f64| h * (z * z - 1.0).powi(2);
    let dv = move |z: f64| -4.0 * h * z * (z * z - 1.0);
    tables_from_free_energy(g, v, dv, |_| 1.0, lambda, beta).unwrap()
}

fn params(lambda: f64, k: usize, dt: f64, dt_macro: f64, n: usize, seed: u64) -> SamplerParams {
    SamplerParams {
        beta: 1.0,
        lambda,
        k,
        delta_t_micro: dt,
        delta_t_macro: dt_macro,
        n,
        seed,
    }
}

#[test]
fn params_validation() {
    assert!(params(1.0, 0, 0.1, 0.1, 10, 0).validate().is_err());
    assert!(params(0.0, 1, 0.1, 0.1, 10, 0).validate().is_err());
    assert!(params(1.0, 1, 0.1, -0.1, 10, 0).validate().is_err());
    assert!(params(1.0, 1, 0.1, 0.1, 10, 0).validate().is_ok());
}

#[test]
fn q0_standard_normal_peak() {
    let t = flat_tables(0.0, 1.0);
    let l = macro_log_q0(0.3, 0.3, &t, 0.5, 1.0).unwrap();
    assert!((l + 0.5 * (2.0 * PI).ln()).abs() < 1e-14);
    let a = macro_log_q0(0.1, 0.9, &t, 0.5, 1.0).unwrap();
    let b = macro_log_q0(0.9, 0.1, &t, 0.5, 1.0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn q0_three_atom_mean_shift_vanishes_at_barrier() {
    let g = Grid::new(0.0, PI, 201).unwrap();
    let t = tables_from_free_energy(g, ThreeAtomModel::free_energy, ThreeAtomModel::drift, |_| 1.0, 1e5, 1.0).unwrap();
    assert!(t.drift.eval(FRAC_PI_2).abs() * 0.01 < 1e-12);
}

#[test]
fn macro_proposal_moments() {
    let t = flat_tables(0.0, 1.0);
    let mut rng = RandomStream::new(3);
    let (dt, n) = (0.25, 100_000);
    let d: Vec<f64> = (0..n).map(|_| macro_propose(0.0, &t, dt, 2.0, &mut rng)).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let want = 2.0 * dt / 2.0;
    assert!(mean.abs() < 3.0 * (want / n as f64).sqrt());
    assert!((var / want - 1.0).abs() < 0.05);
    let mut a = RandomStream::new(9);
    let mut b = RandomStream::new(9);
    assert_eq!(macro_propose(0.4, &t, dt, 1.0, &mut a), macro_propose(0.4, &t, dt, 1.0, &mut b));
}

#[test]
fn macro_acceptance_identities() {
    let t = flat_tables(0.0, 1.0);
    let rc = crate::model::CoordinateProjection::identity();
    assert_eq!(alpha_cg(0.2, 0.2, &t, 0.1, 1.0, &rc).unwrap(), 1.0);
    assert_eq!(alpha_cg(-0.7, 0.2, &t, 0.1, 1.0, &rc).unwrap(), 1.0);
    assert!(log_alpha_cg(0.0, f64::NEG_INFINITY, 0.0, 0.0).is_err());
}

#[test]
fn proposal_outside_image_is_rejected() {
    let system = System::three_atom(1e-3).unwrap();
    let g = Grid::new(0.0, PI, 101).unwrap();
    let t = tables_from_free_energy(g, |_| 0.0, |_| 0.0, |_| 1.0, 1e3, 1.0).unwrap();
    let rc = system.reaction_coordinate();
    assert_eq!(alpha_cg(PI + 0.1, PI - 0.05, &t, 0.01, 1.0, rc).unwrap(), 0.0);
    assert!(alpha_cg(PI - 0.01, PI - 0.05, &t, 0.01, 1.0, rc).unwrap() > 0.0);
}

#[test]
fn micro_acceptance_identities() {
    let t = dw_tables(2.0, 50.0, 1.0);
    assert_eq!(alpha_f_indirect(0.4, 0.4, &t).unwrap(), 1.0);
    // N̂ proportional to μ̄0: ratio is one everywhere.
    let r = log_alpha_f_indirect(-1.3, -0.2, 2.0 * (-1.3f64).exp(), 2.0 * (-0.2f64).exp()).unwrap();
    assert!(r.abs() < 1e-14);
    assert!(log_alpha_f_indirect(0.0, 0.0, 0.0, 1.0).is_err());
    assert_eq!(log_alpha_f_direct(-1.0, -1.0, -2.0, -2.0, 0.5, 0.5).unwrap(), 0.0);
    assert!(log_alpha_f_direct(0.0, 0.0, 0.0, 0.0, f64::NEG_INFINITY, 0.0).is_err());
}

#[test]
fn exact_conditional_gives_unit_direct_acceptance() {
    // With ν̄ = μ/μ0 on the level set, every term cancels.
    let (lmu, lmu2, lmu0, lmu02) = (-3.0, -1.2, -0.4, 0.3);
    let r = log_alpha_f_direct(lmu, lmu2, lmu0, lmu02, lmu - lmu0, lmu2 - lmu02).unwrap();
    assert!(r.abs() < 1e-14);
}

#[test]
fn reconstruction_residual_width() {
    let system = System::double_well(1.0).unwrap();
    let (lambda, beta) = (1e4, 1.0);
    let p = SamplerParams {
        beta,
        lambda,
        k: 200,
        delta_t_micro: 0.5 / lambda,
        delta_t_macro: 0.1,
        n: 1,
        seed: 0,
    };
    let mut rng = RandomStream::new(21);
    let reps = 4000;
    let mut ss = 0.0;
    for _ in 0..reps {
        let (x, rate) =
            indirect_reconstruct(&[1.0], 0.5, &p, system.potential(), system.reaction_coordinate(), &mut rng).unwrap();
        assert!(rate > 0.5);
        ss += (x[0] - 0.5).powi(2);
    }
    let rms = (ss / reps as f64).sqrt();
    // The potential adds curvature V''(0.5) = -1, negligible against λ, and
    // shifts the mean by -V'(0.5)/λ.
    let want = (1.0 / (lambda * beta)).sqrt();
    assert!((rms / want - 1.0).abs() < 0.1, "rms {rms} want {want}");
}

#[test]
fn zero_k_is_rejected() {
    let system = System::double_well(1.0).unwrap();
    let p = params(10.0, 0, 0.01, 0.1, 1, 0);
    let mut rng = RandomStream::new(0);
    assert!(indirect_reconstruct(&[0.0], 0.0, &p, system.potential(), system.reaction_coordinate(), &mut rng).is_err());
}

fn dw_chain(sampler: Sampler, seed: u64, n: usize) -> (Vec<f64>, ChainCounters) {
    let system = System::double_well(2.0).unwrap();
    let lambda = 400.0;
    let t = dw_tables(2.0, lambda, 1.0);
    let p = params(lambda, 10, 0.25 / lambda, 0.05, n, seed);
    let mut xs = Vec::with_capacity(n);
    let c = run_chain(&system, sampler, Some(&t), &p, vec![1.0], 0, |x, _| xs.push(x[0])).unwrap();
    (xs, c)
}

fn dw_cdf() -> QuadratureCdf {
    QuadratureCdf::new(|x| (-2.0 * (x * x - 1.0).powi(2)).exp(), -3.5, 3.5, 70_001).unwrap()
}

#[test]
fn indirect_chain_matches_quadrature() {
    let (xs, c) = dw_chain(Sampler::MmIndirect, 1, 200_000);
    assert_eq!(xs.len(), 200_000);
    assert_eq!(c.steps, 200_000);
    assert!(c.micro_acceptance() > 0.95);
    let cdf = dw_cdf();
    let d = ks_distance(&xs, |x| cdf.eval(x));
    assert!(d < ks_critical_value(0.05, ks_effective_size(&xs)), "ks {d}");
}

#[test]
fn direct_chain_matches_quadrature() {
    let (xs, c) = dw_chain(Sampler::MmDirect, 2, 200_000);
    // Only the interpolation error of the tabulated free energy is rejected.
    assert!(c.micro_acceptance() > 0.999);
    let cdf = dw_cdf();
    let d = ks_distance(&xs, |x| cdf.eval(x));
    assert!(d < ks_critical_value(0.05, ks_effective_size(&xs)), "ks {d}");
}

#[test]
fn chains_are_deterministic() {
    let (a, ca) = dw_chain(Sampler::MmIndirect, 5, 5000);
    let (b, cb) = dw_chain(Sampler::MmIndirect, 5, 5000);
    assert_eq!(ca, cb);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let (c, _) = dw_chain(Sampler::MmIndirect, 6, 5000);
    assert_ne!(a, c);
}

#[test]
fn mala_double_well_masses() {
    let system = System::double_well(2.0).unwrap();
    let p = params(1.0, 1, 0.05, 0.1, 1_000_000, 4);
    let mut left = 0usize;
    run_chain(&system, Sampler::Mala, None, &p, vec![1.0], 0, |x, _| left += (x[0] < 0.0) as usize).unwrap();
    let frac = left as f64 / 1e6;
    assert!((frac - 0.5).abs() < 0.02, "{frac}");
}

#[test]
fn mismatched_lambda_is_rejected() {
    let system = System::double_well(2.0).unwrap();
    let t = dw_tables(2.0, 100.0, 1.0);
    let p = params(200.0, 1, 0.001, 0.1, 10, 0);
    assert!(run_chain(&system, Sampler::MmIndirect, Some(&t), &p, vec![1.0], 0, |_, _| {}).is_err());
    assert!(run_chain(&system, Sampler::MmIndirect, None, &p, vec![1.0], 0, |_, _| {}).is_err());
}

#[test]
fn alanine_has_no_direct_reconstruction() {
    assert!(matches!(DirectReconstructor::new(&System::alanine(), 1.0), Err(Error::Capability(_))));
}

#[test]
fn three_atom_direct_sample_lies_on_level_set() {
    let system = System::three_atom(1e-4).unwrap();
    let r = DirectReconstructor::new(&system, 1.0).unwrap();
    let mut rng = RandomStream::new(1);
    for k in 0..100 {
        let z = 0.3 + 0.025 * k as f64;
        let x = r.sample(z, &mut rng).unwrap();
        let xi = system.reaction_coordinate().value(&x).unwrap();
        assert!((xi - z).abs() < 1e-14);
        assert!(r.log_density(&x).unwrap().is_finite());
    }
}

proptest! {
    #[test]
    fn acceptance_probabilities_are_probabilities(
        a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0, d in -50.0f64..50.0,
        n1 in 1e-30f64..1e30, n2 in 1e-30f64..1e30,
    ) {
        let x = log_alpha_cg(a, b, c, d).unwrap().exp();
        prop_assert!((0.0..=1.0).contains(&x));
        let y = log_alpha_f_indirect(a, b, n1, n2).unwrap().exp();
        prop_assert!((0.0..=1.0).contains(&y));
        let w = log_alpha_f_direct(a, b, c, d, a, b).unwrap().exp();
        prop_assert!((0.0..=1.0).contains(&w));
    }

    #[test]
    fn q0_is_symmetric_without_drift(z1 in -3.0f64..3.0, z2 in -3.0f64..3.0, dt in 0.001f64..1.0) {
        let t = flat_tables(0.0, 1.0);
        let a = macro_log_q0(z1, z2, &t, dt, 1.0).unwrap();
        let b = macro_log_q0(z2, z1, &t, dt, 1.0).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }
}
