//! Exact Lloyd k-means.
//!
//! Assignment fans out over fixed-size chunks of points; per-chunk partial
//! sums are folded in chunk order, so results are bit-identical for any
//! number of worker threads.

use rand::seq::index;
use rayon::prelude::*;

use crate::dataset::FeatureVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::Seed;

const CHUNK: usize = 512;

/// Default convergence tolerance per descriptor dimension.
pub const DEFAULT_TOL_PER_DIM: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iterations: usize,
    /// Bound on the summed centroid displacement of one iteration. `None`
    /// means `1e-4 * h`.
    pub convergence_tol: Option<f64>,
    pub seed: Seed,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iterations: 100,
            convergence_tol: None,
            seed: Seed::default(),
        }
    }
}

impl KMeansParams {
    pub fn with_seed(self, seed: Seed) -> Self {
        KMeansParams { seed, ..self }
    }

    pub fn tolerance(&self, dim: usize) -> f64 {
        self.convergence_tol
            .unwrap_or(DEFAULT_TOL_PER_DIM * dim as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if let Some(t) = self.convergence_tol {
            if !(t >= 0.0) {
                return Err(Error::InvalidConfig(format!("convergence_tol must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub centroids: Vec<FeatureVector<T>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub objective: f64,
    pub iterations_run: usize,
    /// Objective after every iteration's centroid update.
    pub objective_trace: Vec<f64>,
}

/// `m` distinct pool indices drawn uniformly without replacement.
pub fn choose_indices_at_random(m: usize, pool_len: usize, seed: Seed) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::InvalidConfig("cannot choose zero features".into()));
    }
    if m > pool_len {
        return Err(Error::InsufficientFeatures {
            requested: m,
            available: pool_len,
        });
    }
    let mut rng = seed.rng();
    Ok(index::sample(&mut rng, pool_len, m).into_vec())
}

/// `m` distinct pool members drawn uniformly without replacement.
pub fn choose_features_at_random<T, P>(m: usize, pool: &[P], seed: Seed) -> Result<Vec<FeatureVector<T>>>
where
    T: Scalar,
    P: AsRef<[T]>,
{
    choose_indices_at_random(m, pool.len(), seed)?
        .into_iter()
        .map(|i| FeatureVector::new(pool[i].as_ref().to_vec()))
        .collect()
}

/// Refines `initial` centroids by Lloyd iterations over `pool`.
///
/// Each iteration assigns every point to its nearest centroid (lowest index
/// on ties), re-seeds empty clusters, then moves every centroid to the mean
/// of its points. Stops once the summed centroid displacement is within
/// tolerance or after `max_iterations`. An empty cluster is re-seeded with
/// the point farthest from its assigned centroid, taken from a cluster with
/// at least two members.
///
/// # Panics
///
/// If the objective ever increases between iterations beyond rounding
/// noise; that would be an implementation bug.
pub fn ameliorate_using_kmeans<T, I, P>(
    initial: &[I],
    pool: &[P],
    params: &KMeansParams,
) -> Result<KMeansResult<T>>
where
    T: Scalar,
    I: AsRef<[T]>,
    P: AsRef<[T]> + Sync,
{
    params.validate()?;
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if initial.is_empty() {
        return Err(Error::InvalidConfig("k-means needs at least one initial centroid".into()));
    }
    let dim = pool[0].as_ref().len();
    for p in pool.iter().map(AsRef::as_ref).chain(initial.iter().map(AsRef::as_ref)) {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: p.len(),
            });
        }
    }
    let k = initial.len();
    let tol = params.tolerance(dim);

    let mut centroids: Vec<f64> = initial
        .iter()
        .flat_map(|c| c.as_ref().iter().map(|v| v.widen()))
        .collect();
    let mut assignments = vec![0usize; pool.len()];
    let mut dists = vec![0.0f64; pool.len()];
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        assign(pool, &centroids, dim, &mut assignments, &mut dists);

        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        repair_empty(pool, &mut centroids, dim, &mut assignments, &mut dists, &mut counts);

        let sums = accumulate(pool, &assignments, k, dim);
        let mut movement = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let n = counts[c] as f64;
            let row = &mut centroids[c * dim..(c + 1) * dim];
            let mut sq = 0.0;
            for (x, s) in row.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                let mean = s / n;
                sq += (mean - *x) * (mean - *x);
                *x = mean;
            }
            movement += sq.sqrt();
        }

        let objective = total_objective(pool, &centroids, dim, &assignments);
        if let Some(&prev) = trace.last() {
            assert!(
                objective <= prev + 1e-9 * prev.abs().max(1.0),
                "k-means objective increased from {prev} to {objective}"
            );
        }
        trace.push(objective);

        if movement <= tol || iterations >= params.max_iterations {
            break;
        }
    }

    Ok(KMeansResult {
        centroids: centroids.chunks(dim).map(FeatureVector::from_f64).collect(),
        assignments,
        objective: *trace.last().unwrap(),
        iterations_run: iterations,
        objective_trace: trace,
    })
}

/// Random initialization followed by Lloyd refinement.
pub fn kmeans<T, P>(k: usize, pool: &[P], params: &KMeansParams) -> Result<KMeansResult<T>>
where
    T: Scalar,
    P: AsRef<[T]> + Sync,
{
    let init = choose_features_at_random(k, pool, params.seed.derive("kmeans-init"))?;
    ameliorate_using_kmeans(&init, pool, params)
}

#[inline]
fn sq_dist_mixed<T: Scalar>(p: &[T], c: &[f64]) -> f64 {
    p.iter()
        .zip(c)
        .map(|(&x, &y)| {
            let d = x.widen() - y;
            d * d
        })
        .sum()
}

fn assign<T, P>(pool: &[P], centroids: &[f64], dim: usize, assignments: &mut [usize], dists: &mut [f64])
where
    T: Scalar,
    P: AsRef<[T]> + Sync,
{
    pool.par_chunks(CHUNK)
        .zip(assignments.par_chunks_mut(CHUNK))
        .zip(dists.par_chunks_mut(CHUNK))
        .for_each(|((points, out), out_d)| {
            for ((p, a), d) in points.iter().zip(out.iter_mut()).zip(out_d.iter_mut()) {
                let p = p.as_ref();
                let mut best = (0, f64::INFINITY);
                for (j, c) in centroids.chunks_exact(dim).enumerate() {
                    let dd = sq_dist_mixed(p, c);
                    if dd < best.1 {
                        best = (j, dd);
                    }
                }
                *a = best.0;
                *d = best.1;
            }
        });
}

fn repair_empty<T, P>(
    pool: &[P],
    centroids: &mut [f64],
    dim: usize,
    assignments: &mut [usize],
    dists: &mut [f64],
    counts: &mut [usize],
) where
    T: Scalar,
    P: AsRef<[T]>,
{
    for c in 0..counts.len() {
        if counts[c] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in dists.iter().enumerate() {
            if counts[assignments[i]] < 2 {
                continue;
            }
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        // fewer distinct points than clusters: leave the centroid where it is
        let Some((i, _)) = best else { continue };
        counts[assignments[i]] -= 1;
        counts[c] = 1;
        assignments[i] = c;
        dists[i] = 0.0;
        for (x, v) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(pool[i].as_ref()) {
            *x = v.widen();
        }
    }
}

fn accumulate<T, P>(pool: &[P], assignments: &[usize], k: usize, dim: usize) -> Vec<f64>
where
    T: Scalar,
    P: AsRef<[T]> + Sync,
{
    let partials: Vec<Vec<f64>> = pool
        .par_chunks(CHUNK)
        .zip(assignments.par_chunks(CHUNK))
        .map(|(points, assigned)| {
            let mut sums = vec![0.0f64; k * dim];
            for (p, &a) in points.iter().zip(assigned) {
                for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p.as_ref()) {
                    *s += v.widen();
                }
            }
            sums
        })
        .collect();
    let mut total = vec![0.0f64; k * dim];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

fn total_objective<T, P>(pool: &[P], centroids: &[f64], dim: usize, assignments: &[usize]) -> f64
where
    T: Scalar,
    P: AsRef<[T]> + Sync,
{
    let partials: Vec<f64> = pool
        .par_chunks(CHUNK)
        .zip(assignments.par_chunks(CHUNK))
        .map(|(points, assigned)| {
            points
                .iter()
                .zip(assigned)
                .map(|(p, &a)| sq_dist_mixed(p.as_ref(), &centroids[a * dim..(a + 1) * dim]))
                .sum::<f64>()
        })
        .collect();
    partials.into_iter().sum()
}
