use nalgebra::Matrix2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::GaussianMixture;
use crate::geometry::Vec2;
use crate::trajectory::PointSet;
use crate::{Error, Result};

/// Quantile of the chi-square distribution with two degrees of freedom,
/// whose CDF is `1 - exp(-x/2)`.
pub fn chi2_2dof_quantile(p: f64) -> f64 {
    -2.0 * (1.0 - p).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub draws: usize,
    pub accepted: usize,
    pub threshold: f64,
}

impl SampleStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.draws == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.draws as f64
    }
}

fn cholesky(cov: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    cov.cholesky()
        .map(|c| c.l())
        .ok_or(Error::SingularCovariance { det: cov.determinant() })
}

/// Draws `n` points from the mixture, keeping only those within the
/// `confidence` ellipse of the component that produced them.
pub fn sample_gated(mixture: &GaussianMixture, n: usize, confidence: f64, seed: u64) -> Result<PointSet> {
    sample_gated_with_stats(mixture, n, confidence, seed).map(|(p, _)| p)
}

pub fn sample_gated_with_stats(
    mixture: &GaussianMixture,
    n: usize,
    confidence: f64,
    seed: u64,
) -> Result<(PointSet, SampleStats)> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParam(format!(
            "confidence must be in (0, 1), got {confidence}"
        )));
    }
    mixture.validate()?;
    let threshold = chi2_2dof_quantile(confidence);
    let factors = mixture
        .components
        .iter()
        .map(|c| cholesky(&c.covariance))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = mixture.components.iter().map(|c| c.weight).collect();
    let chooser = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidParam(format!("mixture weights: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut draws = 0;
    while points.len() < n {
        let k = chooser.sample(&mut rng);
        let z = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let comp = &mixture.components[k];
        let x = comp.mean + factors[k] * z;
        draws += 1;
        if comp.mahalanobis_sq(&x)? <= threshold {
            points.push(x);
        }
    }
    let stats = SampleStats {
        draws,
        accepted: points.len(),
        threshold,
    };
    Ok((PointSet::new(points)?, stats))
}
