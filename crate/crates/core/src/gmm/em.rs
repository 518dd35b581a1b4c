use nalgebra::Matrix2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    aic, bic, det2, exact_sum, normalize_log_terms, GaussianComponent, GaussianMixture, COV_REGULARIZATION, DET_FLOOR,
};
use crate::geometry::Vec2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmParams {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EmParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub k: usize,
    pub n_points: usize,
    /// Log-likelihood of the initial parameters followed by one entry per
    /// EM iteration.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub k: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub k_best: usize,
    pub mixture: GaussianMixture,
    pub report: FitReport,
    pub table: Vec<ModelScore>,
}

pub(crate) fn distinct_count(data: &[Vec2]) -> usize {
    let mut keys: Vec<(u64, u64)> = data
        .iter()
        .map(|p| ((p.x + 0.0).to_bits(), (p.y + 0.0).to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn mean_and_cov(data: &[Vec2]) -> (Vec2, Matrix2<f64>) {
    let n = data.len() as f64;
    let mean = data.iter().fold(Vec2::zeros(), |acc, p| acc + p) / n;
    let mut cov = Matrix2::zeros();
    for p in data {
        let d = p - mean;
        cov += d * d.transpose();
    }
    (mean, cov / n)
}

/// k-means++ seeding: the first centre uniformly, later ones with
/// probability proportional to squared distance to the nearest chosen centre.
fn kmeans_pp(data: &[Vec2], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let mut centres = vec![data[rng.random_range(0..data.len())]];
    let mut d2: Vec<f64> = data.iter().map(|p| (p - centres[0]).norm_squared()).collect();
    while centres.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => data[dist.sample(rng)],
            // Every remaining point coincides with a centre.
            Err(_) => data[rng.random_range(0..data.len())],
        };
        for (d, p) in d2.iter_mut().zip(data) {
            *d = d.min((p - next).norm_squared());
        }
        centres.push(next);
    }
    centres
}

/// Fills `resp` with responsibilities and returns the log-likelihood.
fn expectation(mixture: &GaussianMixture, data: &[Vec2], resp: &mut [Vec<f64>]) -> Result<f64> {
    let mut norms = Vec::with_capacity(data.len());
    for (x, row) in data.iter().zip(resp.iter_mut()) {
        mixture.weighted_log_terms(x, row)?;
        norms.push(normalize_log_terms(row));
    }
    Ok(exact_sum(norms))
}

/// Per-point expected complete-data log-likelihood of covariance `sigma`
/// for a component whose weighted scatter is `scatter`, up to constants.
fn expected_fit(sigma: &Matrix2<f64>, scatter: &Matrix2<f64>) -> f64 {
    let det = det2(sigma);
    if !(det > DET_FLOOR) {
        return f64::NEG_INFINITY;
    }
    // tr(sigma^-1 scatter) through the adjugate.
    let (a, b, c) = (sigma[(0, 0)], sigma[(0, 1)], sigma[(1, 1)]);
    let tr = (c * scatter[(0, 0)] - 2.0 * b * scatter[(0, 1)] + a * scatter[(1, 1)]) / det;
    -(det.ln() + tr)
}

fn maximization(data: &[Vec2], resp: &[Vec<f64>], previous: &GaussianMixture) -> GaussianMixture {
    let n = data.len() as f64;
    let k = previous.k();
    let mut nk = vec![0.0; k];
    for row in resp {
        for (acc, r) in nk.iter_mut().zip(row) {
            *acc += r;
        }
    }
    let total: f64 = nk.iter().sum();
    let components = (0..k)
        .map(|j| {
            let old = &previous.components[j];
            if nk[j] < 1e-12 * n {
                return GaussianComponent::new(0.0, old.mean, old.covariance);
            }
            let mean = data
                .iter()
                .zip(resp)
                .fold(Vec2::zeros(), |acc, (p, row)| acc + p * row[j])
                / nk[j];
            let mut cov = Matrix2::zeros();
            for (p, row) in data.iter().zip(resp) {
                let d = p - mean;
                cov += d * d.transpose() * row[j];
            }
            cov /= nk[j];
            // Exact symmetry regardless of summation order.
            let off = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
            cov[(0, 1)] = off;
            cov[(1, 0)] = off;
            let loaded = cov + Matrix2::identity() * COV_REGULARIZATION;
            // The loaded estimate is not the exact maximizer, so on tiny
            // components it can lose to the previous covariance. Keeping the
            // better of the two makes this a generalized EM step and the
            // log-likelihood stays non-decreasing.
            // The margin stops round-off from deciding near ties.
            let (keep, take) = (expected_fit(&old.covariance, &cov), expected_fit(&loaded, &cov));
            let covariance = if keep > take + 1e-12 * (1.0 + take.abs()) {
                old.covariance
            } else {
                loaded
            };
            GaussianComponent::new(nk[j] / total, mean, covariance)
        })
        .collect();
    GaussianMixture { components }
}

/// Fits a K-component mixture by expectation-maximization.
///
/// Convergence is declared when the log-likelihood changes by less than
/// `tol` between iterations. Hitting `max_iter` is reported, not raised.
pub fn em_fit(data: &[Vec2], k: usize, params: &EmParams) -> Result<(GaussianMixture, FitReport)> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let distinct = distinct_count(data);
    if distinct < k {
        return Err(Error::DegenerateData { distinct, k });
    }
    if !(params.tol >= 0.0) {
        return Err(Error::InvalidParam(format!("tol must be >= 0, got {}", params.tol)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (_, global_cov) = mean_and_cov(data);
    let init_cov = global_cov + Matrix2::identity() * COV_REGULARIZATION;
    let mut mixture = GaussianMixture {
        components: kmeans_pp(data, k, &mut rng)
            .into_iter()
            .map(|m| GaussianComponent::new(1.0 / k as f64, m, init_cov))
            .collect(),
    };

    let mut resp = vec![vec![0.0; k]; data.len()];
    let mut ll = expectation(&mixture, data, &mut resp)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        mixture = maximization(data, &resp, &mixture);
        let next = expectation(&mixture, data, &mut resp)?;
        trace.push(next);
        let delta = (next - ll).abs();
        ll = next;
        if delta < params.tol {
            converged = true;
            break;
        }
    }

    let report = FitReport {
        k,
        n_points: data.len(),
        log_likelihood_trace: trace,
        iterations,
        converged,
        log_likelihood: ll,
        aic: aic(ll, k),
        bic: bic(ll, k, data.len()),
    };
    Ok((mixture, report))
}

/// Fits every K in `k_min..=k_max` and keeps the lowest BIC, preferring the
/// smaller K on ties. Fits run on scoped threads; the result does not depend
/// on scheduling.
pub fn select_k(data: &[Vec2], k_min: usize, k_max: usize, params: &EmParams) -> Result<Selection> {
    if k_min == 0 || k_max < k_min {
        return Err(Error::InvalidParam(format!(
            "invalid K range {k_min}..={k_max}"
        )));
    }
    let fits: Vec<Result<(GaussianMixture, FitReport)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (k_min..=k_max)
            .map(|k| s.spawn(move || em_fit(data, k, params)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("EM worker panicked"))
            .collect()
    });
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;

    let table: Vec<ModelScore> = fits
        .iter()
        .map(|(_, r)| ModelScore {
            k: r.k,
            log_likelihood: r.log_likelihood,
            aic: r.aic,
            bic: r.bic,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();
    let mut best = 0;
    for (i, score) in table.iter().enumerate() {
        if score.bic < table[best].bic {
            best = i;
        }
    }
    let (mixture, report) = fits.into_iter().nth(best).expect("non-empty range");
    Ok(Selection {
        k_best: report.k,
        mixture,
        report,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn cluster(rng: &mut ChaCha8Rng, centre: Vec2, sigma: f64, n: usize) -> Vec<Vec2> {
        (0..n)
            .map(|_| {
                let zx: f64 = rng.sample(StandardNormal);
                let zy: f64 = rng.sample(StandardNormal);
                centre + Vec2::new(zx, zy) * sigma
            })
            .collect()
    }

    #[test]
    fn k1_is_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<Vec2> = (0..300)
            .map(|_| Vec2::new(rng.random_range(-3.0..5.0), rng.random_range(0.0..2.0)))
            .collect();
        let (m, report) = em_fit(&data, 1, &EmParams::default()).unwrap();
        let n = data.len() as f64;
        let (mut sx, mut sy) = (0.0, 0.0);
        for p in &data {
            sx += p.x;
            sy += p.y;
        }
        let (mx, my) = (sx / n, sy / n);
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for p in &data {
            a += (p.x - mx) * (p.x - mx);
            b += (p.x - mx) * (p.y - my);
            c += (p.y - my) * (p.y - my);
        }
        let comp = &m.components[0];
        assert!((comp.mean.x - mx).abs() < 1e-8 && (comp.mean.y - my).abs() < 1e-8);
        assert!((comp.covariance[(0, 0)] - (a / n + 1e-6)).abs() < 1e-8);
        assert!((comp.covariance[(0, 1)] - b / n).abs() < 1e-8);
        assert!((comp.covariance[(1, 1)] - (c / n + 1e-6)).abs() < 1e-8);
        assert_eq!(comp.weight, 1.0);
        assert!(report.converged && report.iterations <= 2);
    }

    #[test]
    fn two_cluster_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut data = cluster(&mut rng, Vec2::new(0.0, 0.0), 0.5, 500);
        data.extend(cluster(&mut rng, Vec2::new(10.0, 10.0), 0.5, 500));
        let (m, report) = em_fit(&data, 2, &EmParams::default()).unwrap();
        assert!(report.converged);
        for g in [Vec2::new(0.0, 0.0), Vec2::new(10.0, 10.0)] {
            let best = m
                .components
                .iter()
                .map(|c| (c.mean - g).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.2, "{best}");
        }
        let wsum: f64 = m.components.iter().map(|c| c.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_rerun() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = cluster(&mut rng, Vec2::new(1.0, 2.0), 2.0, 400);
        let p = EmParams { seed: 4, ..EmParams::default() };
        let a = em_fit(&data, 4, &p).unwrap();
        let b = em_fit(&data, 4, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_data() {
        let data = vec![Vec2::new(1.0, 1.0); 50];
        assert!(matches!(
            em_fit(&data, 2, &EmParams::default()),
            Err(Error::DegenerateData { distinct: 1, k: 2 })
        ));
        assert!(matches!(em_fit(&[], 1, &EmParams::default()), Err(Error::EmptyData)));
        // One distinct point is still a valid K=1 fit thanks to regularization.
        let (m, _) = em_fit(&data, 1, &EmParams::default()).unwrap();
        assert!((m.components[0].covariance[(0, 0)] - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn max_iter_is_reported_not_raised() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = cluster(&mut rng, Vec2::zeros(), 1.0, 200);
        let p = EmParams { max_iter: 1, tol: 0.0, ..EmParams::default() };
        let (_, r) = em_fit(&data, 3, &p).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(!r.converged);
        assert_eq!(r.log_likelihood_trace.len(), 2);
    }

    #[test]
    fn single_gaussian_selects_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data = cluster(&mut rng, Vec2::new(3.0, -1.0), 1.0, 600);
        let sel = select_k(&data, 1, 5, &EmParams::default()).unwrap();
        assert_eq!(sel.k_best, 1);
        assert_eq!(sel.table.len(), 5);
        // Oracle: recompute BIC from the reported likelihoods.
        for s in &sel.table {
            let p = (6 * s.k - 1) as f64;
            assert!((s.bic - (p * 600f64.ln() - 2.0 * s.log_likelihood)).abs() < 1e-9);
            assert!((s.aic - (2.0 * p - 2.0 * s.log_likelihood)).abs() < 1e-9);
        }
        let min_bic = sel.table.iter().map(|s| s.bic).fold(f64::INFINITY, f64::min);
        assert_eq!(sel.report.bic, min_bic);
    }

    #[test]
    fn invalid_k_range() {
        let data = vec![Vec2::zeros(), Vec2::new(1.0, 0.0)];
        assert!(select_k(&data, 0, 2, &EmParams::default()).is_err());
        assert!(select_k(&data, 3, 2, &EmParams::default()).is_err());
    }
}
