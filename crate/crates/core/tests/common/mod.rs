//! Seeded random channels shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sdmc_rd::model::{Alphabets, ChannelSpec, InputDist, SdmcModel};
use sdmc_rd::rd_ba::EstimatorKernel;

/// Uniform draw from the probability simplex (flat Dirichlet).
pub fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Random model with the given alphabet sizes: flat-Dirichlet rows for every
/// distribution and i.i.d. uniform `[0, 1)` distortions.
pub fn random_model_with(rng: &mut ChaCha8Rng, x: usize, s: usize, t: usize, z: usize) -> SdmcModel<f64> {
    let y = 2;
    let kernel = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec<Vec<f64>>> {
        (0..x).map(|_| (0..s).map(|_| simplex(rng, n)).collect()).collect()
    };
    let spec = ChannelSpec {
        alphabets: Alphabets { x, s, t, y, z },
        state_prior: simplex(rng, s),
        sensing_kernel: kernel(rng, t),
        comm_kernel: kernel(rng, y),
        distortion: (0..s).map(|_| (0..z).map(|_| rng.gen::<f64>()).collect()).collect(),
        input_cost: None,
        labels: None,
    };
    SdmcModel::new(spec).expect("random model is valid")
}

/// Random model with every alphabet size drawn from `2..=4`.
pub fn random_model(rng: &mut ChaCha8Rng) -> SdmcModel<f64> {
    let (x, s, t, z) = (
        rng.gen_range(2..=4),
        rng.gen_range(2..=4),
        rng.gen_range(2..=4),
        rng.gen_range(2..=4),
    );
    random_model_with(rng, x, s, t, z)
}

pub fn random_px(rng: &mut ChaCha8Rng, n: usize) -> InputDist<f64> {
    InputDist::new(simplex(rng, n)).expect("simplex draw is a distribution")
}

pub fn random_kernel(rng: &mut ChaCha8Rng, model: &SdmcModel<f64>) -> EstimatorKernel<f64> {
    let a = model.sizes();
    let probs: Vec<f64> = (0..a.x * a.t).flat_map(|_| simplex(rng, a.z)).collect();
    EstimatorKernel::new(a.x, a.t, a.z, probs).expect("simplex rows are stochastic")
}

pub fn random_deterministic_kernel(rng: &mut ChaCha8Rng, model: &SdmcModel<f64>) -> EstimatorKernel<f64> {
    let a = model.sizes();
    let picks: Vec<usize> = (0..a.x * a.t).map(|_| rng.gen_range(0..a.z)).collect();
    EstimatorKernel::deterministic(a.x, a.t, a.z, |x, t| picks[x * a.t + t])
}
