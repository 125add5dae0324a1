//! Minimum-distortion deterministic estimator and Monte-Carlo checks of
//! arbitrary estimator kernels.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{InputDist, PosteriorLoss, SdmcModel};
use crate::rd_ba::EstimatorKernel;
use crate::scalar::Real;

/// The estimator that picks, for every observation `(x, t)`, the estimate
/// minimizing the posterior expected distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicEstimator<T> {
    x_size: usize,
    t_size: usize,
    z_size: usize,
    decision: Vec<usize>,
    pi: Vec<T>,
    sensing_cost: Vec<T>,
}

impl<T: Real> DeterministicEstimator<T> {
    /// Chosen estimate at `(x, t)`; `0` at probability-zero observations.
    pub fn decision(&self, x: usize, t: usize) -> usize {
        self.decision[x * self.t_size + t]
    }

    /// Minimal posterior expected distortion at `(x, t)`.
    pub fn pi(&self, x: usize, t: usize) -> T {
        self.pi[x * self.t_size + t]
    }

    /// Sensing cost `c(x) = E[pi(x, T) | X = x]`.
    pub fn sensing_cost(&self, x: usize) -> T {
        self.sensing_cost[x]
    }

    pub fn sensing_costs(&self) -> &[T] {
        &self.sensing_cost
    }

    pub fn kernel(&self) -> EstimatorKernel<T> {
        EstimatorKernel::deterministic(self.x_size, self.t_size, self.z_size, |x, t| {
            self.decision(x, t)
        })
    }
}

/// Index of the smallest entry; ties go to the smallest index.
pub(crate) fn argmin<T: Real>(row: &[T]) -> (usize, T) {
    let mut best = (0, row[0]);
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

pub fn build_deterministic_estimator<T: Real>(model: &SdmcModel<T>) -> DeterministicEstimator<T> {
    let a = model.sizes();
    let loss = PosteriorLoss::for_model(model);
    let mut decision = vec![0; a.x * a.t];
    let mut pi = vec![T::zero(); a.x * a.t];
    let mut sensing_cost = vec![T::zero(); a.x];
    for x in 0..a.x {
        for t in 0..a.t {
            if let Some(row) = loss.row(x, t) {
                let (z, v) = argmin(row);
                decision[x * a.t + t] = z;
                pi[x * a.t + t] = v;
                sensing_cost[x] = sensing_cost[x] + model.t_given_x(x, t) * v;
            }
        }
    }
    DeterministicEstimator {
        x_size: a.x,
        t_size: a.t,
        z_size: a.z,
        decision,
        pi,
        sensing_cost,
    }
}

/// Smallest expected distortion any estimator can reach under `px`:
/// `sum_x P_X(x) c(x)`.
pub fn minimum_distortion<T: Real>(model: &SdmcModel<T>, px: &InputDist<T>) -> Result<T> {
    px.check_against(model)?;
    let est = build_deterministic_estimator(model);
    Ok(px
        .probs()
        .iter()
        .zip(est.sensing_costs())
        .map(|(&p, &c)| p * c)
        .sum())
}

/// Best observation-blind estimate `argmin_z sum_s P_S(s) d(s, z)`.
pub fn zero_rate_estimate<T: Real>(model: &SdmcModel<T>) -> usize {
    argmin(&blind_losses(model)).0
}

/// `min_z sum_s P_S(s) d(s, z)`; `R(D) = 0` from here on.
pub fn zero_rate_distortion<T: Real>(model: &SdmcModel<T>) -> T {
    argmin(&blind_losses(model)).1
}

fn blind_losses<T: Real>(model: &SdmcModel<T>) -> Vec<T> {
    let a = model.sizes();
    (0..a.z)
        .map(|z| {
            (0..a.s)
                .map(|s| model.state_prior()[s] * model.distortion(s, z))
                .sum()
        })
        .collect()
}

/// Sample mean of `d(S, Z)` and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalDistortion<T> {
    pub mean: T,
    pub stderr: T,
    pub samples: usize,
}

/// Draws `n` i.i.d. tuples `(x, s, t, z)` from `P_X P_S P_{T|XS} P_{Z|XT}`
/// with a `ChaCha8Rng` seeded from `seed` and averages `d(s, z)`.
/// Output is bit-identical for a given seed.
pub fn simulate_empirical_distortion<T: Real>(
    model: &SdmcModel<T>,
    px: &InputDist<T>,
    kernel: &EstimatorKernel<T>,
    n: usize,
    seed: u64,
) -> Result<EmpiricalDistortion<T>> {
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    px.check_against(model)?;
    kernel.check_against(model)?;
    let a = model.sizes();
    let weighted = |w: Vec<f64>, what: &str| {
        WeightedIndex::new(w).map_err(|e| Error::Internal(format!("{what}: {e}")))
    };
    let x_dist = weighted(px.probs().iter().map(|p| p.as_f64()).collect(), "px")?;
    let s_dist = weighted(model.state_prior().iter().map(|p| p.as_f64()).collect(), "state_prior")?;
    let mut t_dist = Vec::with_capacity(a.x * a.s);
    for x in 0..a.x {
        for s in 0..a.s {
            t_dist.push(weighted(
                (0..a.t).map(|t| model.sensing(x, s, t).as_f64()).collect(),
                "sensing_kernel",
            )?);
        }
    }
    let mut z_dist = Vec::with_capacity(a.x * a.t);
    for x in 0..a.x {
        for t in 0..a.t {
            z_dist.push(weighted(
                kernel.row(x, t).iter().map(|p| p.as_f64()).collect(),
                "kernel",
            )?);
        }
    }
    let dist: Vec<f64> = (0..a.s * a.z)
        .map(|i| model.distortion(i / a.z, i % a.z).as_f64())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let x = x_dist.sample(&mut rng);
        let s = s_dist.sample(&mut rng);
        let t = t_dist[x * a.s + s].sample(&mut rng);
        let z = z_dist[x * a.t + t].sample(&mut rng);
        let d = dist[s * a.z + z];
        sum += d;
        sum_sq += d * d;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let stderr = if n > 1 {
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        (var / nf).sqrt()
    } else {
        0.0
    };
    Ok(EmpiricalDistortion {
        mean: T::lit(mean),
        stderr: T::lit(stderr),
        samples: n,
    })
}
