//! Sample statistics with the integrated autocorrelation factor.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesStats {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Integrated autocorrelation factor, at least 1.
    pub k_corr: f64,
}

impl SeriesStats {
    pub fn effective_size(&self) -> f64 {
        self.count as f64 / self.k_corr
    }

    /// Standard error of the mean accounting for correlation.
    pub fn stderr(&self) -> f64 {
        (self.variance * self.k_corr / self.count as f64).sqrt()
    }
}

/// Normalized autocorrelation `ρ̂(t)` for `t = 0..n`, via FFT.
pub fn autocorrelation(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) {
        let mut r = vec![0.0; n];
        r[0] = 1.0;
        return r;
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Mean, unbiased variance and `K_corr = 1 + 2 Σ ρ̂(t)`, the sum stopped at
/// the first lag with `ρ̂(t) ≤ 0`.
pub fn series_stats(samples: &[f64]) -> Result<SeriesStats> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "series statistics need at least 2 samples, got {n}"
        )));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    let variance = ss / (n - 1) as f64;
    let k_corr = if variance > 0.0 {
        let rho = autocorrelation(samples);
        let mut sum = 0.0;
        for &r in &rho[1..] {
            if r <= 0.0 {
                break;
            }
            sum += r;
        }
        (1.0 + 2.0 * sum).max(1.0)
    } else {
        1.0
    };
    Ok(SeriesStats {
        count: n,
        mean,
        variance,
        k_corr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use proptest::prelude::*;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut r = RandomStream::new(seed);
        (0..n).map(|_| r.normal()).collect()
    }

    #[test]
    fn iid_series() {
        let s = series_stats(&normals(100_000, 1)).unwrap();
        assert!((s.k_corr - 1.0).abs() < 0.1, "{}", s.k_corr);
        assert!((s.variance - 1.0).abs() < 0.02);
    }

    #[test]
    fn ar1_series() {
        let phi = 0.9;
        let mut r = RandomStream::new(2);
        let mut x = 0.0;
        let s: Vec<f64> = (0..1_000_000)
            .map(|_| {
                x = phi * x + r.normal();
                x
            })
            .collect();
        let st = series_stats(&s).unwrap();
        let want = (1.0 + phi) / (1.0 - phi);
        assert!((st.k_corr / want - 1.0).abs() < 0.15, "{}", st.k_corr);
    }

    #[test]
    fn constant_series() {
        let s = series_stats(&[2.5; 50]).unwrap();
        assert_eq!((s.mean, s.variance, s.k_corr), (2.5, 0.0, 1.0));
        assert!(series_stats(&[1.0]).is_err());
    }

    #[test]
    fn fft_matches_direct_sum() {
        let x = normals(300, 3);
        let rho = autocorrelation(&x);
        let m = x.iter().sum::<f64>() / 300.0;
        let c = |t: usize| -> f64 { (0..300 - t).map(|i| (x[i] - m) * (x[i + t] - m)).sum() };
        for t in [0, 1, 5, 77, 299] {
            assert!((rho[t] - c(t) / c(0)).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn permuted_iid_stays_near_one(seed in 0u64..1000) {
            let mut x = normals(20_000, 17);
            let mut r = RandomStream::new(seed);
            for i in (1..x.len()).rev() {
                let j = (r.uniform() * (i + 1) as f64) as usize;
                x.swap(i, j.min(i));
            }
            let k = series_stats(&x).unwrap().k_corr;
            prop_assert!((0.8..=1.3).contains(&k), "{}", k);
        }
    }
}
