use super::iq::IQPoint;
use crate::error::{Error, Result};
use crate::quantum::C64;

/// Points whose distance to every reference mean exceeds this many robust sigmas are streams.
pub const STREAM_SIGMAS: f64 = 3.0;

pub const MIN_POINTS: usize = 10;

/// Nearest-reference-mean classification of IQ points.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub reference_means: Vec<C64>,
    /// Sample mean of the points assigned to each level (the reference mean when none are).
    pub means: Vec<C64>,
    /// Sample covariance `[[var_I, cov], [cov, var_Q]]` of each cluster.
    pub covariances: Vec<[[f64; 2]; 2]>,
    /// Per-quadrature sigma from the median distance to the reference mean.
    pub robust_sigma: Vec<f64>,
    /// `|mu_a - mu_b|` of the sample means for `a < b`.
    pub separations: Vec<((usize, usize), f64)>,
    pub counts: Vec<usize>,
    pub assignments: Vec<usize>,
    /// Ids of points farther than `STREAM_SIGMAS` robust sigmas from every reference mean.
    pub stream_ids: Vec<u64>,
    /// `confusion[prepared][assigned]`, when every point carries a label.
    pub confusion: Option<Vec<Vec<usize>>>,
}

impl ClusterReport {
    pub fn stream_count(&self) -> usize {
        self.stream_ids.len()
    }

    /// Root-mean-square of the per-quadrature standard deviations over populated clusters.
    pub fn mean_sigma(&self) -> f64 {
        let v: Vec<f64> = self
            .covariances
            .iter()
            .zip(&self.counts)
            .filter(|(_, &n)| n >= 2)
            .map(|(c, _)| 0.5 * (c[0][0] + c[1][1]))
            .collect();
        if v.is_empty() {
            return 0.0;
        }
        (v.iter().sum::<f64>() / v.len() as f64).sqrt()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn cluster_report(points: &[IQPoint], reference_means: &[C64]) -> Result<ClusterReport> {
    if points.len() < MIN_POINTS {
        return Err(Error::InvalidArgument(format!(
            "cluster analysis needs at least {MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    let d = reference_means.len();
    if d < 2 {
        return Err(Error::InvalidArgument("need at least two reference means".into()));
    }
    for a in 0..d {
        for b in a + 1..d {
            if (reference_means[a] - reference_means[b]).norm() < 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "reference means of levels {a} and {b} coincide; clusters are not resolvable"
                )));
            }
        }
    }
    if points.iter().any(|p| !p.v_bar.re.is_finite() || !p.v_bar.im.is_finite()) {
        return Err(Error::InvalidArgument("non-finite IQ point".into()));
    }
    let assignments: Vec<usize> = points
        .iter()
        .map(|p| {
            (0..d)
                .min_by(|&a, &b| (p.v_bar - reference_means[a]).norm().total_cmp(&(p.v_bar - reference_means[b]).norm()))
                .expect("d >= 2")
        })
        .collect();
    let mut counts = vec![0usize; d];
    let mut sums = vec![C64::new(0.0, 0.0); d];
    for (p, &a) in points.iter().zip(&assignments) {
        counts[a] += 1;
        sums[a] += p.v_bar;
    }
    let means: Vec<C64> = (0..d)
        .map(|a| if counts[a] > 0 { sums[a] / counts[a] as f64 } else { reference_means[a] })
        .collect();
    let mut covariances = vec![[[0.0; 2]; 2]; d];
    let mut dists = vec![Vec::new(); d];
    for (p, &a) in points.iter().zip(&assignments) {
        let x = p.v_bar - means[a];
        let c = &mut covariances[a];
        c[0][0] += x.re * x.re;
        c[0][1] += x.re * x.im;
        c[1][1] += x.im * x.im;
        dists[a].push((p.v_bar - reference_means[a]).norm());
    }
    for a in 0..d {
        if counts[a] > 0 {
            let n = counts[a] as f64;
            covariances[a][0][0] /= n;
            covariances[a][0][1] /= n;
            covariances[a][1][1] /= n;
            covariances[a][1][0] = covariances[a][0][1];
        }
    }
    // median of a 2D isotropic Gaussian radius is sigma sqrt(2 ln 2)
    let rayleigh = (2.0 * std::f64::consts::LN_2).sqrt();
    let pooled = median(dists.iter().flatten().copied().collect()) / rayleigh;
    let robust_sigma: Vec<f64> = dists
        .iter()
        .map(|v| if v.len() >= 2 { median(v.clone()) / rayleigh } else { pooled })
        .collect();
    let stream_ids = points
        .iter()
        .filter(|p| (0..d).all(|a| (p.v_bar - reference_means[a]).norm() > STREAM_SIGMAS * robust_sigma[a]))
        .map(|p| p.trajectory_id)
        .collect();
    let mut separations = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            separations.push(((a, b), (means[a] - means[b]).norm()));
        }
    }
    let confusion = if points.iter().all(|p| p.label.is_some_and(|l| l < d)) {
        let mut m = vec![vec![0usize; d]; d];
        for (p, &a) in points.iter().zip(&assignments) {
            m[p.label.expect("checked")][a] += 1;
        }
        Some(m)
    } else {
        None
    };
    Ok(ClusterReport {
        reference_means: reference_means.to_vec(),
        means,
        covariances,
        robust_sigma,
        separations,
        counts,
        assignments,
        stream_ids,
        confusion,
    })
}

/// Isotropic Gaussian mixture fitted by expectation maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit {
    pub means: Vec<C64>,
    pub sigma: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// EM fit started from `initial_means`, for comparison with the theory-anchored assignment.
pub fn em_fit(points: &[IQPoint], initial_means: &[C64], max_iter: usize, tol: f64) -> Result<MixtureFit> {
    let k = initial_means.len();
    let n = points.len();
    if k == 0 || n < k {
        return Err(Error::InvalidArgument(format!("{n} points cannot fit {k} components")));
    }
    let mut means = initial_means.to_vec();
    let spread = {
        let c = points.iter().map(|p| p.v_bar).sum::<C64>() / n as f64;
        (points.iter().map(|p| (p.v_bar - c).norm_sqr()).sum::<f64>() / (2.0 * n as f64)).sqrt()
    };
    let mut sigma = vec![spread.max(1e-12); k];
    let mut weights = vec![1.0 / k as f64; k];
    let mut resp = vec![0.0; n * k];
    let mut ll_prev = f64::NEG_INFINITY;
    let mut ll = ll_prev;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        ll = 0.0;
        for (i, p) in points.iter().enumerate() {
            let logs: Vec<f64> = (0..k)
                .map(|a| {
                    let s2 = sigma[a] * sigma[a];
                    weights[a].ln() - (2.0 * std::f64::consts::PI * s2).ln() - (p.v_bar - means[a]).norm_sqr() / (2.0 * s2)
                })
                .collect();
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
            ll += m + z.ln();
            for a in 0..k {
                resp[i * k + a] = (logs[a] - m).exp() / z;
            }
        }
        for a in 0..k {
            let w: f64 = (0..n).map(|i| resp[i * k + a]).sum();
            if w < 1e-12 {
                continue;
            }
            means[a] = (0..n).map(|i| points[i].v_bar * resp[i * k + a]).sum::<C64>() / w;
            let var = (0..n).map(|i| resp[i * k + a] * (points[i].v_bar - means[a]).norm_sqr()).sum::<f64>() / (2.0 * w);
            sigma[a] = var.sqrt().max(1e-12);
            weights[a] = w / n as f64;
        }
        if (ll - ll_prev).abs() <= tol * ll.abs().max(1.0) {
            break;
        }
        ll_prev = ll;
    }
    Ok(MixtureFit {
        means,
        sigma,
        weights,
        log_likelihood: ll,
        iterations,
    })
}
