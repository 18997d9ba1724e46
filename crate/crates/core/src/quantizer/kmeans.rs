use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Codebook, Matrix, Tier, TrainingMeta};
use crate::scalar::{squared_distance, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub max_iters: usize,
    /// Training stops once no centroid moves farther than this (Euclidean, feature units).
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iters: 100,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    /// Inertia measured at the assignment step of each iteration. The first entry is
    /// the inertia of the initial centroids.
    pub inertia_history: Vec<f64>,
    pub iterations_run: usize,
    pub empty_cluster_reassignments: usize,
    pub converged: bool,
    /// Inertia of the returned (storage precision) centroids.
    pub final_inertia: f64,
}

pub struct LloydOutcome<S> {
    pub centroids: Matrix<S>,
    pub stats: TrainingStats,
}

fn check_data<S: Scalar>(data: &Matrix<S>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if data.rows() < k {
        return Err(Error::TooFewPoints {
            tier: None,
            points: data.rows(),
            k,
        });
    }
    if !data.all_finite() {
        return Err(Error::NonFinite("training data"));
    }
    Ok(())
}

/// KMeans++ seeding: first centre uniform, each later centre drawn with probability
/// proportional to its squared distance from the nearest centre chosen so far.
pub fn kmeanspp_init<S: Scalar>(data: &Matrix<S>, k: usize, seed: u64) -> Result<Matrix<S>> {
    check_data(data, k)?;
    let n = data.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];

    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut nearest: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| squared_distance(data.row(i), data.row(first)))
        .collect();

    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                cum += w;
                pick = Some(i);
                if cum > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // every remaining point duplicates a chosen centre
            let remaining = n - chosen.len();
            let nth = rng.random_range(0..remaining);
            (0..n).filter(|&i| !taken[i]).nth(nth).expect("k <= n")
        };
        chosen.push(pick);
        taken[pick] = true;
        let c = data.row(pick);
        nearest.par_iter_mut().enumerate().for_each(|(i, d)| {
            let nd = squared_distance(data.row(i), c);
            if nd < *d {
                *d = nd;
            }
        });
    }
    Matrix::from_rows(data.cols(), chosen.iter().map(|&i| data.row(i)))
}

#[inline]
fn nearest_f64<S: Scalar>(x: &[S], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.chunks_exact(dim).enumerate() {
        let d: f64 = x
            .iter()
            .zip(cen)
            .map(|(&v, &m)| {
                let t = v.as_f64() - m;
                t * t
            })
            .sum();
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Full-batch Lloyd iterations from `init`.
///
/// Centroids are kept in f64 while training and rounded to `S` on return.
/// A cluster left empty by an assignment step is moved onto the point that is
/// currently farthest from its own centroid.
pub fn lloyd_train<S: Scalar>(
    data: &Matrix<S>,
    init: &Matrix<S>,
    params: &KMeansParams,
) -> Result<LloydOutcome<S>> {
    let k = init.rows();
    check_data(data, k)?;
    if init.cols() != data.cols() {
        return Err(Error::DimensionMismatch {
            context: "lloyd_train init",
            expected: data.cols(),
            found: init.cols(),
        });
    }
    if !init.all_finite() {
        return Err(Error::NonFinite("initial centroids"));
    }
    if params.max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    if params.tol.is_nan() || params.tol < 0.0 {
        return Err(Error::Config("tol must be non-negative".into()));
    }

    let dim = data.cols();
    let n = data.rows();
    let mut centroids: Vec<f64> = init.as_slice().iter().map(|v| v.as_f64()).collect();
    let mut stats = TrainingStats {
        inertia_history: Vec::new(),
        iterations_run: 0,
        empty_cluster_reassignments: 0,
        converged: false,
        final_inertia: 0.0,
    };

    for _ in 0..params.max_iters {
        let assignment: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| nearest_f64(data.row(i), &centroids, dim))
            .collect();
        stats.inertia_history.push(assignment.iter().map(|a| a.1).sum());

        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &(c, _)) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(data.row(i)) {
                *s += v.as_f64();
            }
        }

        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        let mut reseed_points = Vec::new();
        if !empty.is_empty() {
            let mut order: Vec<usize> = (0..n).collect();
            // farthest first, lowest index on ties
            order.sort_by(|&a, &b| assignment[b].1.total_cmp(&assignment[a].1).then(a.cmp(&b)));
            reseed_points = order.into_iter().take(empty.len()).collect();
        }

        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                let cnt = counts[c] as f64;
                for (dst, s) in next[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *dst = s / cnt;
                }
            }
        }
        for (&c, &p) in empty.iter().zip(&reseed_points) {
            for (dst, &v) in next[c * dim..(c + 1) * dim].iter_mut().zip(data.row(p)) {
                *dst = v.as_f64();
            }
        }
        stats.empty_cluster_reassignments += empty.len();

        let shift = next
            .chunks_exact(dim)
            .zip(centroids.chunks_exact(dim))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        centroids = next;
        stats.iterations_run += 1;
        if empty.is_empty() && shift < params.tol {
            stats.converged = true;
            break;
        }
    }

    let out = Matrix::from_vec(k, dim, centroids.iter().map(|&v| S::cast_f64(v)).collect())?;
    stats.final_inertia = inertia(data, &out);
    Ok(LloydOutcome {
        centroids: out,
        stats,
    })
}

/// Sum of squared distances from each row to its nearest centroid.
pub fn inertia<S: Scalar>(data: &Matrix<S>, centroids: &Matrix<S>) -> f64 {
    let cen: Vec<f64> = centroids.as_slice().iter().map(|v| v.as_f64()).collect();
    let dists: Vec<f64> = (0..data.rows())
        .into_par_iter()
        .map(|i| nearest_f64(data.row(i), &cen, data.cols()).1)
        .collect();
    dists.iter().sum()
}

/// KMeans++ seeding followed by Lloyd training, packaged as a codebook.
pub fn train_codebook<S: Scalar>(
    tier: Tier,
    data: &Matrix<S>,
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<(Codebook<S>, TrainingStats)> {
    let with_tier = |e: Error| match e {
        Error::TooFewPoints { points, k, .. } => Error::TooFewPoints {
            tier: Some(tier),
            points,
            k,
        },
        other => other,
    };
    let init = kmeanspp_init(data, k, seed).map_err(with_tier)?;
    let LloydOutcome { centroids, stats } = lloyd_train(data, &init, params).map_err(with_tier)?;
    let meta = TrainingMeta {
        seed,
        iterations_run: stats.iterations_run as u32,
        final_inertia: stats.final_inertia,
    };
    Ok((Codebook::new(tier, centroids, meta)?, stats))
}
