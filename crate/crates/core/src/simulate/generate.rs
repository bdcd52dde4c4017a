use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::{build_design, DesignMatrix, FactorLabels};
use crate::rng::{child_rng, Stream};

/// Synthetic AR(1) study settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub phi1: f64,
    pub sigma: f64,
    /// Fraction of nonzero coefficients.
    pub sparsity: f64,
    /// Value of every nonzero coefficient.
    pub kappa: f64,
    pub n_replicates: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 30,
            p: 3,
            q: 1000,
            phi1: 0.9,
            sigma: 1.0,
            sparsity: 0.01,
            kappa: 1.0,
            n_replicates: 10,
            seed: 42,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 {
            return Err(Error::invalid("n, p and q must be positive"));
        }
        if self.n < self.p {
            return Err(Error::invalid("need at least one sample per level"));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(Error::invalid(format!("sparsity {} must lie in (0, 1]", self.sparsity)));
        }
        if !(self.phi1.abs() < 1.0) {
            return Err(Error::invalid(format!("phi1 {} must lie in (-1, 1)", self.phi1)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        Ok(())
    }

    /// Number of nonzero coefficients, at least one.
    pub fn n_nonzero(&self) -> usize {
        ((self.sparsity * (self.p * self.q) as f64 + 1e-9).floor() as usize).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub y: Array2<f64>,
    pub labels: FactorLabels,
    pub x: DesignMatrix,
    pub true_b: Array2<f64>,
    pub noise: Array2<f64>,
}

/// `n` independent stationary AR(1) series of length `q`, innovation
/// standard deviation `sigma`, started from the stationary law.
pub fn ar1_rows<R: Rng + ?Sized>(n: usize, q: usize, phi1: f64, sigma: f64, rng: &mut R) -> Array2<f64> {
    let mut e = Array2::zeros((n, q));
    let sd0 = sigma / (1.0 - phi1 * phi1).sqrt();
    for i in 0..n {
        let mut prev = sd0 * rng.sample::<f64, _>(StandardNormal);
        e[[i, 0]] = prev;
        for t in 1..q {
            prev = phi1 * prev + sigma * rng.sample::<f64, _>(StandardNormal);
            e[[i, t]] = prev;
        }
    }
    e
}

/// Balanced one-way labels `L1..Lp` in contiguous blocks; the first
/// `n mod p` levels get one extra sample.
pub fn balanced_labels(n: usize, p: usize) -> Result<FactorLabels> {
    let mut labels = Vec::with_capacity(n);
    for c in 0..p {
        let size = n / p + usize::from(c < n % p);
        labels.extend(std::iter::repeat_n(format!("L{}", c + 1), size));
    }
    FactorLabels::new(&labels)
}

pub fn generate_dataset(cfg: &SimulationConfig, replicate: usize) -> Result<SimulatedDataset> {
    cfg.validate()?;
    let mut rng = child_rng(cfg.seed, Stream::Dataset, replicate as u64);
    let labels = balanced_labels(cfg.n, cfg.p)?;
    let x = build_design(&labels)?;
    let mut true_b = Array2::zeros((cfg.p, cfg.q));
    for idx in sample(&mut rng, cfg.p * cfg.q, cfg.n_nonzero()) {
        true_b[[idx % cfg.p, idx / cfg.p]] = cfg.kappa;
    }
    let noise = ar1_rows(cfg.n, cfg.q, cfg.phi1, cfg.sigma, &mut rng);
    let y = x.values.dot(&true_b) + &noise;
    Ok(SimulatedDataset {
        y,
        labels,
        x,
        true_b,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::whitening::pooled_autocovariance;

    #[test]
    fn nonzero_count_matches_sparsity() {
        let cfg = SimulationConfig::default();
        assert_eq!(cfg.n_nonzero(), 30);
        let d = generate_dataset(&cfg, 0).unwrap();
        assert_eq!(d.true_b.iter().filter(|&&b| b != 0.0).count(), 30);
        assert!(d.true_b.iter().all(|&b| b == 0.0 || b == 1.0));
        let tiny = SimulationConfig { sparsity: 1e-6, q: 10, ..cfg };
        assert_eq!(tiny.n_nonzero(), 1);
    }

    #[test]
    fn zero_kappa_is_pure_noise() {
        let cfg = SimulationConfig { kappa: 0.0, q: 50, ..Default::default() };
        let d = generate_dataset(&cfg, 3).unwrap();
        assert_eq!(d.y, d.noise);
    }

    #[test]
    fn balanced_design() {
        let d = generate_dataset(&SimulationConfig { q: 20, ..Default::default() }, 0).unwrap();
        assert_eq!(d.x.counts(), &[10, 10, 10]);
        let l = balanced_labels(7, 3).unwrap();
        assert_eq!(l.counts(), vec![3, 2, 2]);
    }

    #[test]
    fn white_generator_has_no_lag_one_correlation() {
        let cfg = SimulationConfig { phi1: 0.0, kappa: 0.0, ..Default::default() };
        let d = generate_dataset(&cfg, 1).unwrap();
        let g = pooled_autocovariance(d.noise.view(), 1).unwrap();
        assert!((g.gamma[0] - 1.0).abs() < 0.05);
        assert!(g.gamma[1].abs() < 0.05);
    }

    #[test]
    fn generator_autocovariance_matches_ar1_law() {
        let (phi, sigma) = (0.7, 1.0);
        let mut rng = crate::rng::rng_from(17);
        // 10 x 1000 = 1e4 draws
        let e = ar1_rows(10, 1000, phi, sigma, &mut rng);
        let g = pooled_autocovariance(e.view(), 3).unwrap();
        for h in 0..=3 {
            let want = sigma * sigma * phi.powi(h as i32) / (1.0 - phi * phi);
            assert!((g.gamma[h] - want).abs() < 0.1 * want, "lag {h}: {} vs {want}", g.gamma[h]);
        }
    }

    #[test]
    fn replicates_are_reproducible() {
        let cfg = SimulationConfig { q: 30, ..Default::default() };
        let a = generate_dataset(&cfg, 5).unwrap();
        let b = generate_dataset(&cfg, 5).unwrap();
        let c = generate_dataset(&cfg, 6).unwrap();
        assert_eq!(a.y, b.y);
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn invalid_configs() {
        let base = SimulationConfig::default();
        assert!(SimulationConfig { sparsity: 0.0, ..base.clone() }.validate().is_err());
        assert!(SimulationConfig { phi1: 1.0, ..base.clone() }.validate().is_err());
        assert!(SimulationConfig { n: 2, ..base }.validate().is_err());
    }
}
