//! Estimator statistics, efficiency gain, histograms and goodness of fit.

mod autocorr;
mod ks;

pub use autocorr::{autocorrelation, series_stats, SeriesStats};
pub use ks::{ks_critical_value, ks_distance, ks_effective_size, QuadratureCdf};

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

/// `(var_micro / var_mm) · (t_micro / t_mm)`.
pub fn efficiency_gain(var_micro: f64, var_mm: f64, t_micro: f64, t_mm: f64) -> Result<f64> {
    for (name, v) in [
        ("var_micro", var_micro),
        ("var_mm", var_mm),
        ("t_micro", t_micro),
        ("t_mm", t_mm),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    Ok((var_micro / var_mm) * (t_micro / t_mm))
}

/// Mean and unbiased variance of replicated estimates.
pub fn replicate_mean_variance(estimates: &[f64]) -> (f64, f64) {
    let n = estimates.len() as f64;
    if estimates.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = estimates.iter().sum::<f64>() / n;
    if estimates.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = estimates.iter().map(|e| (e - mean) * (e - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// One sampler's side of an efficiency comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    /// Variance of the replicated estimator.
    pub variance: f64,
    /// Mean wall-clock time of one run, in seconds.
    pub runtime: f64,
    pub macro_acceptance: Option<f64>,
    pub micro_acceptance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport {
    pub micro: MethodSummary,
    pub mm: MethodSummary,
    pub gain: f64,
}

impl EfficiencyReport {
    pub fn new(micro: MethodSummary, mm: MethodSummary) -> Result<Self> {
        let gain = efficiency_gain(micro.variance, mm.variance, micro.runtime, mm.runtime)?;
        Ok(Self { micro, mm, gain })
    }

    pub fn variance_gain(&self) -> f64 {
        self.micro.variance / self.mm.variance
    }

    pub fn runtime_gain(&self) -> f64 {
        self.micro.runtime / self.mm.runtime
    }
}

/// Fraction of samples with `θ < π/2`.
pub fn well_mass_fraction(theta: &[f64]) -> f64 {
    if theta.is_empty() {
        return f64::NAN;
    }
    theta.iter().filter(|t| **t < FRAC_PI_2).count() as f64 / theta.len() as f64
}

/// Uniform-bin histogram on `[lo, hi]`. Bins are left-closed; the last bin
/// also holds `hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    below: u64,
    above: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || bins == 0 {
            return Err(Error::InvalidParameter(format!(
                "histogram needs lo < hi and at least one bin, got [{lo}, {hi}] with {bins}"
            )));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bins],
            below: 0,
            above: 0,
        })
    }

    pub fn from_samples(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        let mut h = Self::new(lo, hi, bins)?;
        for &s in samples {
            h.add(s);
        }
        Ok(h)
    }

    pub fn add(&mut self, x: f64) {
        if x < self.lo || x.is_nan() {
            self.below += 1;
        } else if x > self.hi {
            self.above += 1;
        } else {
            let b = self.counts.len();
            let i = (((x - self.lo) / (self.hi - self.lo)) * b as f64) as usize;
            self.counts[i.min(b - 1)] += 1;
        }
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.lo != other.lo || self.hi != other.hi || self.counts.len() != other.counts.len() {
            return Err(Error::InvalidParameter("histograms have different bins".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.below += other.below;
        self.above += other.above;
        Ok(())
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn out_of_range(&self) -> u64 {
        self.below + self.above
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.out_of_range()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        let right = if i + 1 == self.counts.len() {
            self.hi
        } else {
            self.lo + (i + 1) as f64 * w
        };
        (self.lo + i as f64 * w, right)
    }

    /// Counts divided by `total · width`; integrates to the in-range fraction.
    pub fn density(&self) -> Vec<f64> {
        let norm = self.total() as f64 * self.bin_width();
        self.counts
            .iter()
            .map(|&c| if norm > 0.0 { c as f64 / norm } else { 0.0 })
            .collect()
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "bin_left,bin_right,count,density")?;
        for (i, d) in self.density().iter().enumerate() {
            let (l, r) = self.bin_edges(i);
            writeln!(w, "{l},{r},{},{d}", self.counts[i])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use proptest::prelude::*;

    #[test]
    fn gain_examples() {
        assert_eq!(efficiency_gain(2.0, 2.0, 3.0, 3.0).unwrap(), 1.0);
        let g = efficiency_gain(920.651, 1.0, 0.212561, 1.0).unwrap();
        assert!((g - 195.695).abs() < 1e-3);
        let g = efficiency_gain(1.43e-3, 1.25e-7, 17.5, 31.6).unwrap();
        assert!((g / 6336.0 - 1.0).abs() < 1e-3, "{g}");
        assert!(efficiency_gain(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(efficiency_gain(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn report_gain_is_consistent() {
        let m = |v, t| MethodSummary {
            method: "x".into(),
            variance: v,
            runtime: t,
            macro_acceptance: None,
            micro_acceptance: None,
        };
        let r = EfficiencyReport::new(m(8.0, 1.0), m(2.0, 4.0)).unwrap();
        assert_eq!(r.gain, 1.0);
        assert_eq!(r.variance_gain() * r.runtime_gain(), r.gain);
    }

    #[test]
    fn histogram_edges() {
        let mut h = Histogram::new(0.0, 1.0, 4).unwrap();
        h.add(0.0);
        h.add(1.0);
        h.add(0.25);
        h.add(-0.1);
        h.add(1.5);
        assert_eq!(h.counts(), &[1, 1, 0, 1]);
        assert_eq!(h.out_of_range(), 2);
        assert_eq!(h.total(), 5);
        assert!(Histogram::new(1.0, 1.0, 3).is_err());
        assert!(Histogram::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn uniform_histogram() {
        let mut rng = RandomStream::new(8);
        let s: Vec<f64> = (0..1_000_000).map(|_| rng.uniform()).collect();
        let h = Histogram::from_samples(&s, 0.0, 1.0, 10).unwrap();
        // Four binomial standard deviations, sqrt(N p (1 - p)) with p = 0.1.
        let tol = 4.0 * (1e6f64 * 0.09).sqrt();
        for &c in h.counts() {
            assert!((c as f64 - 1e5).abs() < tol, "{c}");
        }
        let mass: f64 = h.density().iter().map(|d| d * h.bin_width()).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let h = Histogram::from_samples(&[0.1, 0.6, 0.7], 0.0, 1.0, 2).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bin_left,bin_right,count,density");
        assert_eq!(lines[2], format!("0.5,1,2,{}", 2.0 / 1.5));
    }

    #[test]
    fn well_fraction() {
        assert_eq!(well_mass_fraction(&[0.1, 0.2]), 1.0);
        assert_eq!(well_mass_fraction(&[0.1, 2.0]), 0.5);
    }

    #[test]
    fn replicate_variance() {
        let (m, v) = replicate_mean_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn gain_is_multiplicative(a in 1e-3f64..1e3, b in 1e-3f64..1e3, v in 1e-6f64..1e3, t in 1e-6f64..1e3) {
            let g = efficiency_gain(a * v, v, b * t, t).unwrap();
            prop_assert!((g / (a * b) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn histogram_conserves_samples(s in proptest::collection::vec(-2.0f64..3.0, 0..200), bins in 1usize..20) {
            let h = Histogram::from_samples(&s, -1.0, 2.0, bins).unwrap();
            prop_assert_eq!(h.total() as usize, s.len());
            let mass: f64 = h.density().iter().map(|d| d * h.bin_width()).sum();
            if !s.is_empty() {
                prop_assert!((mass - h.in_range() as f64 / s.len() as f64).abs() < 1e-12);
            }
        }
    }
}
