//! Two-dimensional Gaussian mixtures: density evaluation, EM fitting,
//! information-criterion model selection and confidence-gated sampling.
//!
//! All mixture arithmetic runs in log space; component densities are
//! combined with log-sum-exp so far-apart components cannot underflow.

mod em;
mod sampling;

pub use em::{em_fit, select_k, EmParams, FitReport, ModelScore, Selection};
pub use sampling::{chi2_2dof_quantile, sample_gated, sample_gated_with_stats, SampleStats};

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::{Error, Result};

/// Diagonal loading added to every covariance estimate, m^2.
pub const COV_REGULARIZATION: f64 = 1e-6;

/// Determinants below this are treated as singular.
pub const DET_FLOOR: f64 = 1e-300;

/// 2x2 determinant by Kahan's fused multiply-add scheme, accurate to a few
/// ulps even when the two products nearly cancel.
pub(crate) fn det2(c: &Matrix2<f64>) -> f64 {
    let w = c[(0, 1)] * c[(1, 0)];
    let e = (-c[(0, 1)]).mul_add(c[(1, 0)], w);
    let f = c[(0, 0)].mul_add(c[(1, 1)], -w);
    f + e
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec2,
    pub covariance: Matrix2<f64>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Vec2, covariance: Matrix2<f64>) -> Self {
        Self {
            weight,
            mean,
            covariance,
        }
    }

    fn det(&self) -> Result<f64> {
        let c = &self.covariance;
        let det = det2(c);
        if !(det > DET_FLOOR) || !(c[(0, 0)] > 0.0) {
            return Err(Error::SingularCovariance { det });
        }
        Ok(det)
    }

    /// Squared Mahalanobis distance in Cholesky form, `dx^2/a + r^2 a/det`
    /// with `r = dy - (b/a) dx`, which avoids the cancellation of the
    /// expanded quadratic form on nearly singular covariances.
    pub fn mahalanobis_sq(&self, x: &Vec2) -> Result<f64> {
        let det = self.det()?;
        let c = &self.covariance;
        let d = x - self.mean;
        let (a, b) = (c[(0, 0)], 0.5 * (c[(0, 1)] + c[(1, 0)]));
        let r = d.y - (b / a) * d.x;
        Ok(d.x * d.x / a + r * r * a / det)
    }

    /// `ln N(x; mean, cov)`, without the mixture weight.
    pub fn ln_density(&self, x: &Vec2) -> Result<f64> {
        let det = self.det()?;
        let m = self.mahalanobis_sq(x)?;
        Ok(-(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * m)
    }
}

pub fn mahalanobis_sq(component: &GaussianComponent, x: &Vec2) -> Result<f64> {
    component.mahalanobis_sq(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub components: Vec<GaussianComponent>,
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Correctly rounded sum of `values` (Shewchuk's exact partials).
pub(crate) fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    // Round the partials to one value, handling the half-way case.
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        n -= 1;
        let x = hi;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Responsibilities from weighted log terms, normalized after shifting by
/// the maximum so ties split exactly. Returns the log normalizer.
pub(crate) fn normalize_log_terms(terms: &mut [f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for t in terms.iter_mut() {
        *t = (*t - max).exp();
        total += *t;
    }
    for t in terms.iter_mut() {
        *t /= total;
    }
    max + total.ln()
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let m = Self { components };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParam("mixture needs at least one component".into()));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if self.components.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "weights must be non-negative and sum to 1 (sum = {total})"
            )));
        }
        for c in &self.components {
            let cov = &c.covariance;
            if (cov[(0, 1)] - cov[(1, 0)]).abs() > 1e-12 * (1.0 + cov[(0, 1)].abs()) {
                return Err(Error::InvalidParam("covariance must be symmetric".into()));
            }
            c.det()?;
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Per-component `ln pi_k + ln N(x | k)`, written into `out`.
    pub(crate) fn weighted_log_terms(&self, x: &Vec2, out: &mut [f64]) -> Result<()> {
        for (slot, c) in out.iter_mut().zip(&self.components) {
            *slot = c.weight.ln() + c.ln_density(x)?;
        }
        Ok(())
    }

    pub fn ln_pdf(&self, x: &Vec2) -> Result<f64> {
        let mut terms = vec![0.0; self.k()];
        self.weighted_log_terms(x, &mut terms)?;
        Ok(log_sum_exp(&terms))
    }

    pub fn pdf(&self, x: &Vec2) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    /// Sum of `ln p(x_n)` over the data.
    pub fn log_likelihood(&self, data: &[Vec2]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut terms = vec![0.0; self.k()];
        let per_point = data
            .iter()
            .map(|x| {
                self.weighted_log_terms(x, &mut terms)?;
                Ok(log_sum_exp(&terms))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(exact_sum(per_point))
    }

    /// Row-stochastic responsibilities, one row of length K per data point.
    pub fn e_step(&self, data: &[Vec2]) -> Result<Vec<Vec<f64>>> {
        let mut terms = vec![0.0; self.k()];
        data.iter()
            .map(|x| {
                self.weighted_log_terms(x, &mut terms)?;
                normalize_log_terms(&mut terms);
                Ok(terms.clone())
            })
            .collect()
    }

    /// Hard assignment of each point to its most responsible component.
    pub fn classify(&self, data: &[Vec2]) -> Result<Vec<usize>> {
        let mut terms = vec![0.0; self.k()];
        data.iter()
            .map(|x| {
                self.weighted_log_terms(x, &mut terms)?;
                Ok(terms
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0))
            })
            .collect()
    }

    /// Free parameters of a full-covariance 2D mixture: `6K - 1`.
    pub fn n_parameters(&self) -> usize {
        n_parameters(self.k())
    }
}

pub fn n_parameters(k: usize) -> usize {
    6 * k - 1
}

pub fn aic(log_likelihood: f64, k: usize) -> f64 {
    2.0 * n_parameters(k) as f64 - 2.0 * log_likelihood
}

pub fn bic(log_likelihood: f64, k: usize, n: usize) -> f64 {
    n_parameters(k) as f64 * (n as f64).ln() - 2.0 * log_likelihood
}

/// JSON form of one component: `{weight, mean: [x, y], cov: [[a, b], [b, c]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub weight: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl From<&GaussianComponent> for ComponentRecord {
    fn from(c: &GaussianComponent) -> Self {
        let m = &c.covariance;
        Self {
            weight: c.weight,
            mean: [c.mean.x, c.mean.y],
            cov: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        }
    }
}

impl From<&ComponentRecord> for GaussianComponent {
    fn from(r: &ComponentRecord) -> Self {
        GaussianComponent::new(
            r.weight,
            Vec2::new(r.mean[0], r.mean[1]),
            Matrix2::new(r.cov[0][0], r.cov[0][1], r.cov[1][0], r.cov[1][1]),
        )
    }
}

impl Serialize for GaussianMixture {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let records: Vec<ComponentRecord> = self.components.iter().map(Into::into).collect();
        records.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GaussianMixture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let records = Vec::<ComponentRecord>::deserialize(d)?;
        GaussianMixture::new(records.iter().map(Into::into).collect())
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(mean: Vec2, w: f64) -> GaussianComponent {
        GaussianComponent::new(w, mean, Matrix2::identity())
    }

    #[test]
    fn peak_density() {
        let m = GaussianMixture::new(vec![unit(Vec2::new(3.0, -1.0), 1.0)]).unwrap();
        let p = m.pdf(&Vec2::new(3.0, -1.0)).unwrap();
        assert!((p - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((p - 0.159155).abs() < 1e-6);
    }

    #[test]
    fn far_component_contributes_nothing() {
        let m = GaussianMixture::new(vec![
            unit(Vec2::new(0.0, 0.0), 0.5),
            unit(Vec2::new(100.0, 0.0), 0.5),
        ])
        .unwrap();
        let p = m.pdf(&Vec2::zeros()).unwrap();
        // Far term is 0.5/(2 pi) * exp(-5000).
        assert!((p - 0.5 / (2.0 * PI)).abs() < 1e-100);
        let r = m.e_step(&[Vec2::zeros()]).unwrap();
        assert_eq!(r[0][0], 1.0);
        assert!(r[0][1] < 1e-100);
    }

    #[test]
    fn pdf_integrates_to_one() {
        let m = GaussianMixture::new(vec![
            GaussianComponent::new(0.3, Vec2::new(-1.0, 0.5), Matrix2::new(0.8, 0.3, 0.3, 0.5)),
            GaussianComponent::new(0.7, Vec2::new(2.0, -1.0), Matrix2::new(1.5, -0.4, -0.4, 0.9)),
        ])
        .unwrap();
        // Midpoint rule over [-12, 12]^2.
        let n = 480;
        let h = 24.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = Vec2::new(-12.0 + (i as f64 + 0.5) * h, -12.0 + (j as f64 + 0.5) * h);
                total += m.pdf(&x).unwrap() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn log_likelihood_cases() {
        let m = GaussianMixture::new(vec![unit(Vec2::zeros(), 1.0)]).unwrap();
        let ll = m.log_likelihood(&[Vec2::zeros()]).unwrap();
        assert!((ll - (1.0 / (2.0 * PI)).ln()).abs() < 1e-14);
        assert!((ll + 1.837877).abs() < 1e-6);
        assert!(matches!(m.log_likelihood(&[]), Err(Error::EmptyData)));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mix = GaussianMixture::new(vec![
            GaussianComponent::new(0.4, Vec2::new(0.0, 1.0), Matrix2::new(2.0, 0.5, 0.5, 1.0)),
            GaussianComponent::new(0.6, Vec2::new(4.0, -2.0), Matrix2::new(0.7, 0.0, 0.0, 0.3)),
        ])
        .unwrap();
        let data: Vec<Vec2> = (0..100)
            .map(|_| Vec2::new(rng.random_range(-5.0..8.0), rng.random_range(-5.0..5.0)))
            .collect();
        let naive: f64 = data.iter().map(|x| mix.pdf(x).unwrap().ln()).sum();
        let ll = mix.log_likelihood(&data).unwrap();
        assert!((ll - naive).abs() < 1e-10);
        let doubled: Vec<Vec2> = data.iter().chain(data.iter()).copied().collect();
        assert_eq!(mix.log_likelihood(&doubled).unwrap(), 2.0 * ll);
    }

    #[test]
    fn responsibilities() {
        let one = GaussianMixture::new(vec![unit(Vec2::zeros(), 1.0)]).unwrap();
        for row in one.e_step(&[Vec2::new(5.0, 5.0), Vec2::new(-1.0, 2.0)]).unwrap() {
            assert_eq!(row, vec![1.0]);
        }
        let two = GaussianMixture::new(vec![
            unit(Vec2::new(-2.0, 0.0), 0.5),
            unit(Vec2::new(2.0, 0.0), 0.5),
        ])
        .unwrap();
        let r = two.e_step(&[Vec2::new(0.0, 3.0)]).unwrap();
        assert_eq!(r[0], vec![0.5, 0.5]);
        assert_eq!(two.classify(&[Vec2::new(-1.5, 0.0)]).unwrap(), vec![0]);
    }

    #[test]
    fn mahalanobis_cases() {
        let c = unit(Vec2::new(1.0, 1.0), 1.0);
        assert_eq!(c.mahalanobis_sq(&Vec2::new(1.0, 1.0)).unwrap(), 0.0);
        assert!((c.mahalanobis_sq(&Vec2::new(4.0, 5.0)).unwrap() - 25.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a: f64 = rng.random_range(0.1..3.0);
            let d: f64 = rng.random_range(0.1..3.0);
            let b: f64 = rng.random_range(-0.9..0.9) * (a * d).sqrt();
            let mean = Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let x = Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let comp = GaussianComponent::new(1.0, mean, Matrix2::new(a, b, b, d));
            // Cofactor inverse.
            let det = a * d - b * b;
            let (ia, ib, id) = (d / det, -b / det, a / det);
            let v = x - mean;
            let expected = ia * v.x * v.x + 2.0 * ib * v.x * v.y + id * v.y * v.y;
            let got = comp.mahalanobis_sq(&x).unwrap();
            assert!((got - expected).abs() <= 1e-9 * expected.max(1.0));
        }
    }

    #[test]
    fn singular_covariance_rejected() {
        let c = GaussianComponent::new(1.0, Vec2::zeros(), Matrix2::new(1.0, 1.0, 1.0, 1.0));
        assert!(matches!(c.mahalanobis_sq(&Vec2::zeros()), Err(Error::SingularCovariance { .. })));
        assert!(GaussianMixture::new(vec![c]).is_err());
    }

    #[test]
    fn parameter_count_and_criteria() {
        assert_eq!(n_parameters(1), 5);
        assert_eq!(n_parameters(15), 89);
        assert_eq!(aic(-10.0, 1), 30.0);
        assert!((bic(-10.0, 1, 100) - (5.0 * 100f64.ln() + 20.0)).abs() < 1e-12);
    }

    #[test]
    fn json_schema() {
        let m = GaussianMixture::new(vec![GaussianComponent::new(
            1.0,
            Vec2::new(1.5, -2.0),
            Matrix2::new(2.0, 0.25, 0.25, 1.0),
        )])
        .unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"[{"weight":1.0,"mean":[1.5,-2.0],"cov":[[2.0,0.25],[0.25,1.0]]}]"#);
        let back: GaussianMixture = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<GaussianMixture>(r#"[{"weight":0.5,"mean":[0,0],"cov":[[1,0],[0,1]]}]"#).is_err());
    }
}
