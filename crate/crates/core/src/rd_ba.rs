//! Blahut–Arimoto type alternating minimization for the estimator
//! rate-distortion function `R(D) = min I(T;Z|X)` subject to `E[d(S,Z)] <= D`.
//!
//! For a slope `mu <= 0` the solver minimizes
//!
//! ```text
//! F_mu(P, Q) = D(P_{Z|XT} || Q_{Z|X} | P_{XT}) - mu E[d(S,Z)]
//! ```
//!
//! by alternating the two closed-form partial minimizers:
//!
//! * `P(z|x,t) ∝ Q(z|x) exp(mu E[d(S,z)|x,t])` ([`p_update`])
//! * `Q(z|x) = sum_t P_{T|X}(t|x) P(z|x,t)` ([`q_update`])
//!
//! starting from a uniform `Q`. The iteration only depends on `P_X` through
//! the objective weights; probability-zero observations `(x, t)` are skipped.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{minimum_distortion, zero_rate_estimate, zero_rate_distortion};
use crate::model::{
    conditional_mutual_information, expected_distortion, joint_xt, InputDist,
    PosteriorLoss, SdmcModel,
};
use crate::scalar::Real;

/// Conditional distribution `P_{Z|XT}`, row-major `[x][t][z]`. Every row is
/// a probability vector, including rows at probability-zero observations.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorKernel<T> {
    x_size: usize,
    t_size: usize,
    z_size: usize,
    probs: Vec<T>,
}

impl<T: Real> EstimatorKernel<T> {
    /// Validates row-stochasticity (within the ingestion tolerance) and
    /// renormalizes.
    pub fn new(x_size: usize, t_size: usize, z_size: usize, probs: Vec<T>) -> Result<Self> {
        if probs.len() != x_size * t_size * z_size || z_size == 0 {
            return Err(Error::validation(
                "kernel",
                format!("expected {} entries, got {}", x_size * t_size * z_size, probs.len()),
            ));
        }
        let tol = T::floor_tol(crate::model::INGEST_TOL);
        let mut probs = probs;
        for (cell, row) in probs.chunks_mut(z_size).enumerate() {
            let path = format!("kernel[{}][{}]", cell / t_size, cell % t_size);
            if row.iter().any(|v| !v.is_finite() || *v < T::zero()) {
                return Err(Error::validation(path, "negative or non-finite entry"));
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::validation(path, format!("row sums to {sum}")));
            }
            row.iter_mut().for_each(|v| *v = *v / sum);
        }
        Ok(Self {
            x_size,
            t_size,
            z_size,
            probs,
        })
    }

    pub fn from_fn(
        x_size: usize,
        t_size: usize,
        z_size: usize,
        f: impl Fn(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(x_size * t_size * z_size);
        for x in 0..x_size {
            for t in 0..t_size {
                for z in 0..z_size {
                    probs.push(f(x, t, z));
                }
            }
        }
        Self::new(x_size, t_size, z_size, probs)
    }

    /// Point mass on `decision(x, t)`.
    pub fn deterministic(
        x_size: usize,
        t_size: usize,
        z_size: usize,
        decision: impl Fn(usize, usize) -> usize,
    ) -> Self {
        let mut probs = vec![T::zero(); x_size * t_size * z_size];
        for x in 0..x_size {
            for t in 0..t_size {
                probs[(x * t_size + t) * z_size + decision(x, t)] = T::one();
            }
        }
        Self {
            x_size,
            t_size,
            z_size,
            probs,
        }
    }

    pub fn uniform(x_size: usize, t_size: usize, z_size: usize) -> Self {
        Self {
            x_size,
            t_size,
            z_size,
            probs: vec![T::one() / T::from_count(z_size); x_size * t_size * z_size],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, t: usize, z: usize) -> T {
        self.probs[(x * self.t_size + t) * self.z_size + z]
    }

    pub fn row(&self, x: usize, t: usize) -> &[T] {
        let c = x * self.t_size + t;
        &self.probs[c * self.z_size..(c + 1) * self.z_size]
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn t_size(&self) -> usize {
        self.t_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    pub(crate) fn check_against(&self, model: &SdmcModel<T>) -> Result<()> {
        let a = model.sizes();
        if (self.x_size, self.t_size, self.z_size) != (a.x, a.t, a.z) {
            return Err(Error::validation(
                "kernel",
                format!(
                    "shape [{}][{}][{}] does not match model [{}][{}][{}]",
                    self.x_size, self.t_size, self.z_size, a.x, a.t, a.z
                ),
            ));
        }
        Ok(())
    }
}

/// Output marginal `Q_{Z|X}`, row-major `[x][z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalQ<T> {
    x_size: usize,
    z_size: usize,
    probs: Vec<T>,
}

impl<T: Real> MarginalQ<T> {
    pub fn uniform(x_size: usize, z_size: usize) -> Self {
        Self {
            x_size,
            z_size,
            probs: vec![T::one() / T::from_count(z_size); x_size * z_size],
        }
    }

    pub fn new(x_size: usize, z_size: usize, probs: Vec<T>) -> Result<Self> {
        let k = EstimatorKernel::new(x_size, 1, z_size, probs)?;
        Ok(Self {
            x_size,
            z_size,
            probs: k.probs,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, z: usize) -> T {
        self.probs[x * self.z_size + z]
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.probs[x * self.z_size..(x + 1) * self.z_size]
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    /// `sum_{x in rows, z} |self - other|`.
    fn l1_distance(&self, other: &Self, rows: &[bool]) -> T {
        let mut acc = T::zero();
        for x in 0..self.x_size {
            if !rows[x] {
                continue;
            }
            for (a, b) in self.row(x).iter().zip(other.row(x)) {
                acc = acc + (*a - *b).abs();
            }
        }
        acc
    }
}

/// Solver settings for one slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BaConfig<T> {
    /// Lagrange slope, nats per unit distortion. Must be `<= 0`.
    pub mu: T,
    /// Stopping threshold on `sum_{x,z} |Q^(k) - Q^(k-1)|`.
    pub tol: T,
    pub max_iter: usize,
    /// Keep the full half-step objective sequence in the solution.
    pub record_trace: bool,
}

impl<T: Real> Default for BaConfig<T> {
    fn default() -> Self {
        Self {
            mu: T::lit(-1.0),
            tol: T::floor_tol(1e-9),
            max_iter: 100_000,
            record_trace: false,
        }
    }
}

impl<T: Real> BaConfig<T> {
    pub fn with_mu(mu: T) -> Self {
        Self {
            mu,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu <= T::zero()) {
            return Err(Error::Domain(format!("mu must be <= 0, got {}", self.mu)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Domain(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// One converged (or flagged) point of the rate-distortion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RdPoint<T> {
    pub mu: T,
    pub distortion: T,
    pub rate_bits: T,
    pub objective_nats: T,
    pub iterations: usize,
    pub converged: bool,
    /// Every recorded half-step of the objective was non-increasing.
    pub monotone: bool,
}

/// Result of [`solve_fixed_mu`].
#[derive(Debug, Clone)]
pub struct BaSolution<T> {
    pub point: RdPoint<T>,
    pub kernel: EstimatorKernel<T>,
    pub marginal: MarginalQ<T>,
    /// Largest observed increase between consecutive half-steps (`<= 0` when
    /// the sequence is monotone).
    pub max_increase: T,
    /// `F(P1,Q0), F(P1,Q1), F(P2,Q1), ...` when requested.
    pub trace: Option<Vec<T>>,
}

/// Shared per-problem data: posterior losses and observation probabilities.
struct Problem<'a, T> {
    model: &'a SdmcModel<T>,
    loss: PosteriorLoss<T>,
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(model: &'a SdmcModel<T>) -> Self {
        Self {
            model,
            loss: PosteriorLoss::for_model(model),
        }
    }

    fn p_update(&self, q: &MarginalQ<T>, mu: T) -> EstimatorKernel<T> {
        let a = self.model.sizes();
        let mut probs = vec![T::zero(); a.x * a.t * a.z];
        let mut expo = vec![T::zero(); a.z];
        for x in 0..a.x {
            let qrow = q.row(x);
            for t in 0..a.t {
                let out = &mut probs[(x * a.t + t) * a.z..(x * a.t + t + 1) * a.z];
                let Some(loss) = self.loss.row(x, t) else {
                    out.copy_from_slice(qrow);
                    continue;
                };
                let mut top = T::neg_infinity();
                for z in 0..a.z {
                    expo[z] = if qrow[z] > T::zero() {
                        qrow[z].ln() + mu * loss[z]
                    } else {
                        T::neg_infinity()
                    };
                    top = top.max(expo[z]);
                }
                debug_assert!(top.is_finite(), "Q row has no positive entry");
                let mut norm = T::zero();
                for z in 0..a.z {
                    out[z] = (expo[z] - top).exp();
                    norm = norm + out[z];
                }
                out.iter_mut().for_each(|v| *v = *v / norm);
            }
        }
        EstimatorKernel {
            x_size: a.x,
            t_size: a.t,
            z_size: a.z,
            probs,
        }
    }

    fn q_update(&self, p: &EstimatorKernel<T>) -> MarginalQ<T> {
        let a = self.model.sizes();
        let mut probs = vec![T::zero(); a.x * a.z];
        for x in 0..a.x {
            let row = &mut probs[x * a.z..(x + 1) * a.z];
            for t in 0..a.t {
                let w = self.model.t_given_x(x, t);
                if w <= T::zero() {
                    continue;
                }
                for (z, r) in row.iter_mut().enumerate() {
                    *r = *r + w * p.get(x, t, z);
                }
            }
            let norm: T = row.iter().copied().sum();
            row.iter_mut().for_each(|v| *v = *v / norm);
        }
        MarginalQ {
            x_size: a.x,
            z_size: a.z,
            probs,
        }
    }

    fn objective(&self, p: &EstimatorKernel<T>, q: &MarginalQ<T>, px: &InputDist<T>, mu: T) -> T {
        let a = self.model.sizes();
        let mut div = T::zero();
        let mut dist = T::zero();
        for x in 0..a.x {
            let wx = px.probs()[x];
            if wx <= T::zero() {
                continue;
            }
            for t in 0..a.t {
                let Some(loss) = self.loss.row(x, t) else {
                    continue;
                };
                let w = wx * self.model.t_given_x(x, t);
                for z in 0..a.z {
                    let pz = p.get(x, t, z);
                    if w * pz <= T::zero() {
                        continue;
                    }
                    // an underflowed marginal entry next to a representable
                    // kernel entry only happens at denormal scale
                    let qz = q.get(x, z).max(T::min_positive_value());
                    div = div + w * pz * (pz / qz).ln();
                    dist = dist + w * pz * loss[z];
                }
            }
        }
        div - mu * dist
    }
}

/// Partial minimizer of `F_mu` over the kernel for a fixed marginal.
pub fn p_update<T: Real>(q: &MarginalQ<T>, model: &SdmcModel<T>, mu: T) -> Result<EstimatorKernel<T>> {
    if !(mu <= T::zero()) {
        return Err(Error::Domain(format!("mu must be <= 0, got {mu}")));
    }
    let a = model.sizes();
    if (q.x_size, q.z_size) != (a.x, a.z) {
        return Err(Error::validation("marginal", "shape does not match model"));
    }
    Ok(Problem::new(model).p_update(q, mu))
}

/// Partial minimizer of `F_mu` over the marginal for a fixed kernel.
pub fn q_update<T: Real>(p: &EstimatorKernel<T>, model: &SdmcModel<T>) -> Result<MarginalQ<T>> {
    p.check_against(model)?;
    Ok(Problem::new(model).q_update(p))
}

/// `F_mu(P, Q)` in nats. Infinite when `P` puts mass where `Q` has none.
pub fn evaluate_objective<T: Real>(
    p: &EstimatorKernel<T>,
    q: &MarginalQ<T>,
    model: &SdmcModel<T>,
    px: &InputDist<T>,
    mu: T,
) -> Result<T> {
    p.check_against(model)?;
    px.check_against(model)?;
    Ok(Problem::new(model).objective(p, q, px, mu))
}

/// Runs the alternating minimization for one slope.
///
/// At `mu = 0` every `t`-independent kernel minimizes the objective; the
/// solver returns the `mu -> 0-` limit, i.e. the best observation-blind
/// estimate with `R = 0` and `D` equal to the zero-rate distortion.
pub fn solve_fixed_mu<T: Real>(
    model: &SdmcModel<T>,
    px: &InputDist<T>,
    cfg: &BaConfig<T>,
) -> Result<BaSolution<T>> {
    cfg.validate()?;
    px.check_against(model)?;
    let a = model.sizes();
    let joint = joint_xt(model, px)?;

    if cfg.mu == T::zero() {
        let z0 = zero_rate_estimate(model);
        let kernel = EstimatorKernel::deterministic(a.x, a.t, a.z, |_, _| z0);
        let problem = Problem::new(model);
        let marginal = problem.q_update(&kernel);
        let distortion = expected_distortion(model, px, &kernel)?;
        return Ok(BaSolution {
            point: RdPoint {
                mu: cfg.mu,
                distortion,
                rate_bits: T::zero(),
                objective_nats: T::zero(),
                iterations: 0,
                converged: true,
                monotone: true,
            },
            kernel,
            marginal,
            max_increase: T::neg_infinity(),
            trace: cfg.record_trace.then(Vec::new),
        });
    }

    let problem = Problem::new(model);
    let active: Vec<bool> = px.probs().iter().map(|&p| p > T::zero()).collect();
    let mut q = MarginalQ::uniform(a.x, a.z);
    let mut p;
    let mut f_prev = T::infinity();
    let mut max_increase = T::neg_infinity();
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut iterations = 0;
    let mut converged = false;
    let slack = |f: T| T::floor_tol(1e-12) * f.abs().max(T::one());

    loop {
        iterations += 1;
        p = problem.p_update(&q, cfg.mu);
        let f_half = problem.objective(&p, &q, px, cfg.mu);
        let q_next = problem.q_update(&p);
        let f_full = problem.objective(&p, &q_next, px, cfg.mu);
        if f_prev.is_finite() {
            max_increase = max_increase.max(f_half - f_prev);
        }
        max_increase = max_increase.max(f_full - f_half);
        if let Some(tr) = trace.as_mut() {
            tr.push(f_half);
            tr.push(f_full);
        }
        let step = q_next.l1_distance(&q, &active);
        q = q_next;
        f_prev = f_full;
        if step <= cfg.tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
    }

    let rate = conditional_mutual_information(&joint, &p)?;
    let distortion = expected_distortion(model, px, &p)?;
    Ok(BaSolution {
        point: RdPoint {
            mu: cfg.mu,
            distortion,
            rate_bits: rate.nats_to_bits(),
            objective_nats: f_prev,
            iterations,
            converged,
            monotone: max_increase <= slack(f_prev),
        },
        kernel: p,
        marginal: q,
        max_increase,
        trace,
    })
}

/// Where a curve came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CurveProvenance<T> {
    pub model_fingerprint: u64,
    pub px: Vec<T>,
    pub mu_grid: Vec<T>,
    pub tol: T,
    pub max_iter: usize,
}

/// Rate-distortion points sorted by ascending distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RdCurve<T> {
    pub points: Vec<RdPoint<T>>,
    pub provenance: CurveProvenance<T>,
    pub all_converged: bool,
    /// `D(mu)` was non-decreasing along the ascending grid.
    pub distortion_monotone_in_mu: bool,
}

impl<T: Real> RdCurve<T> {
    /// `R` non-increasing in `D` up to `tol` bits.
    pub fn rate_nonincreasing(&self, tol: T) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].rate_bits <= w[0].rate_bits + tol)
    }

    /// Largest vertical distance (bits) of any point above the lower convex
    /// hull of the point set.
    pub fn hull_gap(&self) -> T {
        let pts: Vec<(T, T)> = self.points.iter().map(|p| (p.distortion, p.rate_bits)).collect();
        let hull = lower_hull(&pts);
        pts.iter()
            .map(|&(d, r)| r - interpolate(&hull, d))
            .fold(T::zero(), T::max)
    }

    /// Hash of the exact bit patterns of every `(mu, D, R)` triple.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in &self.points {
            p.mu.as_f64().to_bits().hash(&mut h);
            p.distortion.as_f64().to_bits().hash(&mut h);
            p.rate_bits.as_f64().to_bits().hash(&mut h);
        }
        h.finish()
    }
}

fn lower_hull<T: Real>(pts: &[(T, T)]) -> Vec<(T, T)> {
    let mut sorted = pts.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    let mut hull: Vec<(T, T)> = Vec::new();
    for p in sorted {
        if hull.last().is_some_and(|l| l.0 == p.0) {
            continue;
        }
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= T::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

fn interpolate<T: Real>(hull: &[(T, T)], d: T) -> T {
    for w in hull.windows(2) {
        if d >= w[0].0 && d <= w[1].0 {
            let f = (d - w[0].0) / (w[1].0 - w[0].0);
            return w[0].1 + f * (w[1].1 - w[0].1);
        }
    }
    hull.iter().find(|p| p.0 == d).map_or(T::neg_infinity(), |p| p.1)
}

/// Default slope grid: 40 geometrically spaced slopes from `-50` to `-1e-2`
/// followed by `0`.
pub fn default_mu_grid<T: Real>() -> Vec<T> {
    let mut g = geometric_grid(T::lit(-50.0), T::lit(-1e-2), 40);
    g.push(T::zero());
    g
}

/// `n` points between `lo` and `hi` (same sign, nonzero) evenly spaced in
/// `ln |mu|`, returned in ascending order.
pub fn geometric_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![lo];
    }
    let (la, lb) = (lo.abs().ln(), hi.abs().ln());
    let sign = lo.signum();
    let mut g: Vec<T> = (0..n)
        .map(|i| {
            let f = T::from_count(i) / T::from_count(n - 1);
            sign * (la + f * (lb - la)).exp()
        })
        .collect();
    g[0] = lo;
    g[n - 1] = hi;
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g
}

/// Solves every slope of `mu_grid` (ascending, all `<= 0`) and returns the
/// points sorted by distortion. Slopes are solved in parallel; the result
/// does not depend on the thread count.
pub fn trace_curve<T: Real>(
    model: &SdmcModel<T>,
    px: &InputDist<T>,
    mu_grid: &[T],
    base: &BaConfig<T>,
) -> Result<RdCurve<T>> {
    if mu_grid.is_empty() {
        return Err(Error::Domain("mu grid is empty".into()));
    }
    if mu_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Domain("mu grid must be sorted ascending".into()));
    }
    px.check_against(model)?;

    let solved: Vec<RdPoint<T>> = mu_grid
        .par_iter()
        .map(|&mu| {
            let cfg = BaConfig {
                mu,
                record_trace: false,
                ..*base
            };
            solve_fixed_mu(model, px, &cfg).map(|s| s.point)
        })
        .collect::<Result<_>>()?;

    let d_slack = T::floor_tol(1e-7);
    let distortion_monotone_in_mu = solved
        .windows(2)
        .all(|w| w[1].distortion + d_slack >= w[0].distortion);
    let all_converged = solved.iter().all(|p| p.converged);

    let mut points = solved;
    points.sort_by(|a, b| {
        a.distortion
            .partial_cmp(&b.distortion)
            .unwrap()
            .then(a.rate_bits.partial_cmp(&b.rate_bits).unwrap())
    });
    let dup = T::floor_tol(1e-9);
    let mut dedup: Vec<RdPoint<T>> = Vec::with_capacity(points.len());
    for p in points {
        match dedup.last_mut() {
            Some(last) if (p.distortion - last.distortion).abs() <= dup => {
                if p.rate_bits < last.rate_bits {
                    *last = p;
                }
            }
            _ => dedup.push(p),
        }
    }

    Ok(RdCurve {
        points: dedup,
        provenance: CurveProvenance {
            model_fingerprint: model.fingerprint(),
            px: px.probs().to_vec(),
            mu_grid: mu_grid.to_vec(),
            tol: base.tol,
            max_iter: base.max_iter,
        },
        all_converged,
        distortion_monotone_in_mu,
    })
}

/// Finds the slope whose solution has distortion within `tol` of `d_target`
/// by bisection, and returns that solution.
pub fn rate_at_distortion<T: Real>(
    model: &SdmcModel<T>,
    px: &InputDist<T>,
    d_target: T,
    tol: T,
) -> Result<BaSolution<T>> {
    rate_at_distortion_with(model, px, d_target, tol, &BaConfig::default())
}

/// [`rate_at_distortion`] with explicit inner solver settings (`base.mu` is
/// ignored).
pub fn rate_at_distortion_with<T: Real>(
    model: &SdmcModel<T>,
    px: &InputDist<T>,
    d_target: T,
    tol: T,
    base: &BaConfig<T>,
) -> Result<BaSolution<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Domain(format!("tol must be > 0, got {tol}")));
    }
    let d_min = minimum_distortion(model, px)?;
    let d_max = zero_rate_distortion(model);
    if d_target < d_min - tol {
        return Err(Error::Infeasible(format!(
            "target distortion {d_target} is below the minimum achievable distortion {d_min}"
        )));
    }
    if d_target > d_max + tol {
        return Err(Error::Domain(format!(
            "target distortion {d_target} exceeds the zero-rate distortion {d_max}"
        )));
    }
    let solve = |mu: T| {
        solve_fixed_mu(
            model,
            px,
            &BaConfig {
                mu,
                record_trace: false,
                ..*base
            },
        )
    };
    if d_target >= d_max - tol {
        return solve(T::zero());
    }

    let mut best: Option<BaSolution<T>> = None;
    let mut keep_best = |s: &BaSolution<T>| {
        let better = best.as_ref().is_none_or(|b| {
            (s.point.distortion - d_target).abs() < (b.point.distortion - d_target).abs()
        });
        if better {
            best = Some(s.clone());
        }
    };
    let stalled = |reason: &str, b: &Option<BaSolution<T>>| {
        let p = b.as_ref().map(|s| s.point);
        Error::Stalled {
            reason: reason.to_string(),
            mu: p.map_or(f64::NAN, |p| p.mu.as_f64()),
            distortion: p.map_or(f64::NAN, |p| p.distortion.as_f64()),
            rate_bits: p.map_or(f64::NAN, |p| p.rate_bits.as_f64()),
        }
    };

    // grow the bracket until D(-span) <= target
    let mut span = T::one();
    let limit = T::lit(1e6);
    let mut lo;
    let mut hi = T::zero();
    loop {
        let s = solve(-span)?;
        keep_best(&s);
        if (s.point.distortion - d_target).abs() <= tol {
            return Ok(s);
        }
        if s.point.distortion < d_target {
            lo = -span;
            break;
        }
        hi = -span;
        span = span * T::lit(2.0);
        if span > limit {
            return Err(stalled("slope bracket exceeded 1e6", &best));
        }
    }

    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = solve(mid)?;
        keep_best(&s);
        if (s.point.distortion - d_target).abs() <= tol {
            return Ok(s);
        }
        if s.point.distortion > d_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(stalled("bisection on mu stalled before reaching tolerance", &best))
}
