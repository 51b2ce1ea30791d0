//! Kolmogorov-Smirnov comparison of a chain against a reference law.

use super::autocorr::series_stats;
use crate::error::{Error, Result};

/// A cumulative distribution tabulated by trapezoid quadrature of an
/// unnormalized density on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct QuadratureCdf {
    lo: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl QuadratureCdf {
    pub fn new(density: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < hi) || points < 2 {
            return Err(Error::InvalidParameter("quadrature needs lo < hi and 2 points".into()));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let f: Vec<f64> = (0..points).map(|i| density(lo + i as f64 * step)).collect();
        let mut cdf = Vec::with_capacity(points);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..points {
            acc += 0.5 * step * (f[i - 1] + f[i]);
            cdf.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::InvalidParameter("density does not integrate to a positive value".into()));
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self { lo, step, cdf })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.step;
        if t <= 0.0 {
            return 0.0;
        }
        let j = t.floor() as usize;
        if j + 1 >= self.cdf.len() {
            return 1.0;
        }
        let f = t - j as f64;
        self.cdf[j] + f * (self.cdf[j + 1] - self.cdf[j])
    }
}

/// Supremum distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic one-sample critical value `sqrt(-ln(α/2)/2) / sqrt(n)`.
pub fn ks_critical_value(alpha: f64, n: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / n.sqrt()
}

/// Effective sample size of a correlated chain for a distributional test:
/// `N / max K_corr`, the maximum over the indicator series `1{x ≤ q}` at the
/// sample deciles.
pub fn ks_effective_size(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return n as f64;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut k_max: f64 = 1.0;
    let mut ind = vec![0.0; n];
    for d in 1..10 {
        let q = sorted[d * n / 10];
        for (o, &x) in ind.iter_mut().zip(samples) {
            *o = if x <= q { 1.0 } else { 0.0 };
        }
        if let Ok(s) = series_stats(&ind) {
            k_max = k_max.max(s.k_corr);
        }
    }
    n as f64 / k_max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    #[test]
    fn uniform_cdf() {
        let c = QuadratureCdf::new(|_| 3.0, 0.0, 2.0, 5).unwrap();
        assert_eq!(c.eval(-1.0), 0.0);
        assert!((c.eval(0.5) - 0.25).abs() < 1e-15);
        assert_eq!(c.eval(5.0), 1.0);
    }

    #[test]
    fn iid_normals_pass() {
        let mut r = RandomStream::new(4);
        let s: Vec<f64> = (0..20_000).map(|_| r.normal()).collect();
        let c = QuadratureCdf::new(|x| (-0.5 * x * x).exp(), -9.0, 9.0, 20_001).unwrap();
        let d = ks_distance(&s, |x| c.eval(x));
        let n = ks_effective_size(&s);
        assert!(n > 15_000.0);
        assert!(d < ks_critical_value(0.05, n));
    }

    #[test]
    fn shifted_sample_fails() {
        let mut r = RandomStream::new(5);
        let s: Vec<f64> = (0..20_000).map(|_| r.normal() + 0.1).collect();
        let c = QuadratureCdf::new(|x| (-0.5 * x * x).exp(), -9.0, 9.0, 20_001).unwrap();
        assert!(ks_distance(&s, |x| c.eval(x)) > ks_critical_value(0.05, 20_000.0));
    }

    #[test]
    fn critical_value_at_five_percent() {
        assert!((ks_critical_value(0.05, 1.0) - 1.3581).abs() < 1e-4);
    }
}
