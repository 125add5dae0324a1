//! Finite state-dependent memoryless channel (SDMC) model and the shared
//! probabilistic primitives built on it.
//!
//! A model bundles the state prior `P_S`, the sensing kernel `P_{T|XS}` seen
//! by the transmitter-side estimator, the communication kernel `P_{Y|XS}` seen
//! by the receiver, a per-symbol distortion `d(s, z)` and an optional transmit
//! cost `b(x)`. All tensors are stored flat in row-major order with the last
//! index varying fastest.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rd_ba::EstimatorKernel;
use crate::scalar::Real;

/// Row-sum tolerance applied when ingesting probability vectors.
pub const INGEST_TOL: f64 = 1e-9;

/// Alphabet cardinalities `|X|, |S|, |T|, |Y|, |Z|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alphabets {
    pub x: usize,
    pub s: usize,
    pub t: usize,
    pub y: usize,
    pub z: usize,
}

/// Optional display names per alphabet.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<String>>,
}

impl Labels {
    fn is_empty(&self) -> bool {
        self.x.is_none() && self.s.is_none() && self.t.is_none() && self.y.is_none() && self.z.is_none()
    }
}

/// Serialized channel description (JSON). Nested arrays mirror the index
/// order `sensing_kernel[x][s][t]`, `comm_kernel[x][s][y]`, `distortion[s][z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct ChannelSpec<T> {
    pub alphabets: Alphabets,
    pub state_prior: Vec<T>,
    pub sensing_kernel: Vec<Vec<Vec<T>>>,
    pub comm_kernel: Vec<Vec<Vec<T>>>,
    pub distortion: Vec<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_cost: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Labels>,
}

/// Validated SDMC model. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SdmcModel<T> {
    sizes: Alphabets,
    state_prior: Vec<T>,
    sensing: Vec<T>,
    comm: Vec<T>,
    distortion: Vec<T>,
    input_cost: Vec<T>,
    labels: Labels,
    t_given_x: Vec<T>,
}

fn check_prob_row<T: Real>(row: &[T], path: &str) -> Result<Vec<T>> {
    let tol = T::floor_tol(INGEST_TOL);
    for (i, &v) in row.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::validation(format!("{path}[{i}]"), "entry is not finite"));
        }
        if v < T::zero() {
            return Err(Error::validation(format!("{path}[{i}]"), format!("negative entry {v}")));
        }
    }
    let sum: T = row.iter().copied().sum();
    if (sum - T::one()).abs() > tol {
        return Err(Error::validation(path, format!("row sums to {sum}, expected 1")));
    }
    // rows already stochastic up to rounding are kept bit-exact so that a
    // model survives a save/load round trip unchanged
    if (sum - T::one()).abs() <= T::epsilon() * T::from_count(row.len().max(1) * 4) {
        return Ok(row.to_vec());
    }
    Ok(row.iter().map(|&v| v / sum).collect())
}

fn check_len<A>(v: &[A], expected: usize, path: &str) -> Result<()> {
    if v.len() != expected {
        return Err(Error::validation(
            path,
            format!("has {} entries, alphabet size is {expected}", v.len()),
        ));
    }
    Ok(())
}

fn check_kernel<T: Real>(
    kernel: &[Vec<Vec<T>>],
    name: &str,
    nx: usize,
    ns: usize,
    nout: usize,
) -> Result<Vec<T>> {
    check_len(kernel, nx, name)?;
    let mut flat = Vec::with_capacity(nx * ns * nout);
    for (x, per_x) in kernel.iter().enumerate() {
        check_len(per_x, ns, &format!("{name}[{x}]"))?;
        for (s, row) in per_x.iter().enumerate() {
            let path = format!("{name}[{x}][{s}]");
            check_len(row, nout, &path)?;
            flat.extend(check_prob_row(row, &path)?);
        }
    }
    Ok(flat)
}

impl<T: Real> SdmcModel<T> {
    /// Validates a parsed channel description and renormalizes every probability
    /// row to exact row-stochasticity.
    pub fn new(spec: ChannelSpec<T>) -> Result<Self> {
        let a = spec.alphabets;
        for (name, n) in [("x", a.x), ("s", a.s), ("t", a.t), ("y", a.y), ("z", a.z)] {
            if n == 0 {
                return Err(Error::validation(format!("alphabets.{name}"), "must be positive"));
            }
        }
        check_len(&spec.state_prior, a.s, "state_prior")?;
        let state_prior = check_prob_row(&spec.state_prior, "state_prior")?;
        let sensing = check_kernel(&spec.sensing_kernel, "sensing_kernel", a.x, a.s, a.t)?;
        let comm = check_kernel(&spec.comm_kernel, "comm_kernel", a.x, a.s, a.y)?;

        check_len(&spec.distortion, a.s, "distortion")?;
        let mut distortion = Vec::with_capacity(a.s * a.z);
        for (s, row) in spec.distortion.iter().enumerate() {
            check_len(row, a.z, &format!("distortion[{s}]"))?;
            for (z, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < T::zero() {
                    return Err(Error::validation(
                        format!("distortion[{s}][{z}]"),
                        format!("must be finite and nonnegative, got {v}"),
                    ));
                }
                distortion.push(v);
            }
        }

        let input_cost = match spec.input_cost {
            Some(b) => {
                check_len(&b, a.x, "input_cost")?;
                for (x, &v) in b.iter().enumerate() {
                    if !v.is_finite() || v < T::zero() {
                        return Err(Error::validation(
                            format!("input_cost[{x}]"),
                            format!("must be finite and nonnegative, got {v}"),
                        ));
                    }
                }
                b
            }
            None => vec![T::zero(); a.x],
        };

        let labels = spec.labels.unwrap_or_default();
        for (name, lab, n) in [
            ("x", &labels.x, a.x),
            ("s", &labels.s, a.s),
            ("t", &labels.t, a.t),
            ("y", &labels.y, a.y),
            ("z", &labels.z, a.z),
        ] {
            if let Some(l) = lab {
                check_len(l, n, &format!("labels.{name}"))?;
            }
        }

        let mut t_given_x = vec![T::zero(); a.x * a.t];
        for x in 0..a.x {
            for s in 0..a.s {
                for t in 0..a.t {
                    t_given_x[x * a.t + t] =
                        t_given_x[x * a.t + t] + state_prior[s] * sensing[(x * a.s + s) * a.t + t];
                }
            }
        }

        Ok(Self {
            sizes: a,
            state_prior,
            sensing,
            comm,
            distortion,
            input_cost,
            labels,
            t_given_x,
        })
    }

    /// Parses and validates a JSON channel document.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ChannelSpec<T> =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(spec)
    }

    pub fn to_spec(&self) -> ChannelSpec<T> {
        let a = self.sizes;
        let nest = |flat: &[T], nout: usize| -> Vec<Vec<Vec<T>>> {
            (0..a.x)
                .map(|x| {
                    (0..a.s)
                        .map(|s| flat[(x * a.s + s) * nout..(x * a.s + s + 1) * nout].to_vec())
                        .collect()
                })
                .collect()
        };
        ChannelSpec {
            alphabets: a,
            state_prior: self.state_prior.clone(),
            sensing_kernel: nest(&self.sensing, a.t),
            comm_kernel: nest(&self.comm, a.y),
            distortion: self.distortion.chunks(a.z).map(|r| r.to_vec()).collect(),
            input_cost: if self.input_cost.iter().all(|&b| b == T::zero()) {
                None
            } else {
                Some(self.input_cost.clone())
            },
            labels: if self.labels.is_empty() {
                None
            } else {
                Some(self.labels.clone())
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_spec()).expect("spec serializes")
    }

    pub fn sizes(&self) -> Alphabets {
        self.sizes
    }

    pub fn state_prior(&self) -> &[T] {
        &self.state_prior
    }

    /// `P_{T|XS}(t|x,s)`.
    #[inline]
    pub fn sensing(&self, x: usize, s: usize, t: usize) -> T {
        self.sensing[(x * self.sizes.s + s) * self.sizes.t + t]
    }

    /// `P_{Y|XS}(y|x,s)`.
    #[inline]
    pub fn comm(&self, x: usize, s: usize, y: usize) -> T {
        self.comm[(x * self.sizes.s + s) * self.sizes.y + y]
    }

    /// `d(s, z)`.
    #[inline]
    pub fn distortion(&self, s: usize, z: usize) -> T {
        self.distortion[s * self.sizes.z + z]
    }

    /// `b(x)`.
    #[inline]
    pub fn input_cost(&self, x: usize) -> T {
        self.input_cost[x]
    }

    pub fn input_costs(&self) -> &[T] {
        &self.input_cost
    }

    /// `P_{T|X}(t|x) = sum_s P_S(s) P_{T|XS}(t|x,s)`.
    #[inline]
    pub fn t_given_x(&self, x: usize, t: usize) -> T {
        self.t_given_x[x * self.sizes.t + t]
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn d_max(&self) -> T {
        self.distortion.iter().copied().fold(T::zero(), T::max)
    }

    /// Whether the observation `t` can occur when `x` is sent.
    #[inline]
    pub fn is_defined(&self, x: usize, t: usize) -> bool {
        self.t_given_x(x, t) > T::zero()
    }

    /// Stable 64-bit fingerprint of the model contents.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.sizes.hash(&mut h);
        for v in self
            .state_prior
            .iter()
            .chain(&self.sensing)
            .chain(&self.comm)
            .chain(&self.distortion)
            .chain(&self.input_cost)
        {
            v.as_f64().to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Expected distortion `E[d(S,Z)|X=x,T=t]` of every estimate `z`, given the
    /// posterior. Undefined cells are left at zero.
    pub fn posterior_loss(&self, posterior: &PosteriorS<T>) -> PosteriorLoss<T> {
        let a = self.sizes;
        let mut loss = vec![T::zero(); a.x * a.t * a.z];
        for x in 0..a.x {
            for t in 0..a.t {
                if let Some(post) = posterior.get(x, t) {
                    let row = &mut loss[(x * a.t + t) * a.z..(x * a.t + t + 1) * a.z];
                    for (z, out) in row.iter_mut().enumerate() {
                        *out = post
                            .iter()
                            .enumerate()
                            .map(|(s, &p)| p * self.distortion(s, z))
                            .sum();
                    }
                }
            }
        }
        PosteriorLoss {
            x_size: a.x,
            t_size: a.t,
            z_size: a.z,
            loss,
            defined: posterior.defined.clone(),
        }
    }
}

/// Parses and validates a JSON channel document.
pub fn load_channel_spec<T: Real>(text: &str) -> Result<SdmcModel<T>> {
    SdmcModel::from_json(text)
}

/// Input distribution `P_X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InputDist<T> {
    probs: Vec<T>,
}

impl<T: Real> InputDist<T> {
    /// Validates (row-sum tolerance [`INGEST_TOL`]) and renormalizes.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::validation("px", "empty distribution"));
        }
        let probs = check_prob_row(&probs, "px")?;
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![T::one() / T::from_count(n); n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probs = vec![T::zero(); n];
        probs[at] = T::one();
        Self { probs }
    }

    /// Builds from weights that are already exactly normalized by the caller
    /// (solver outputs). Still rejects non-finite or negative entries.
    pub(crate) fn from_normalized(probs: Vec<T>) -> Self {
        debug_assert!(probs.iter().all(|p| p.is_finite() && *p >= T::zero()));
        Self { probs }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub(crate) fn check_against(&self, model: &SdmcModel<T>) -> Result<()> {
        if self.len() != model.sizes().x {
            return Err(Error::validation(
                "px",
                format!("has {} entries, |X| = {}", self.len(), model.sizes().x),
            ));
        }
        Ok(())
    }
}

/// Joint `P_{XT}(x,t)`, row-major `[x][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointXT<T> {
    x_size: usize,
    t_size: usize,
    mass: Vec<T>,
}

impl<T: Real> JointXT<T> {
    #[inline]
    pub fn get(&self, x: usize, t: usize) -> T {
        self.mass[x * self.t_size + t]
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.mass[x * self.t_size..(x + 1) * self.t_size]
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn t_size(&self) -> usize {
        self.t_size
    }

    pub fn total(&self) -> T {
        self.mass.iter().copied().sum()
    }
}

/// `P_{XT}(x,t) = P_X(x) sum_s P_S(s) P_{T|XS}(t|x,s)`.
pub fn joint_xt<T: Real>(model: &SdmcModel<T>, px: &InputDist<T>) -> Result<JointXT<T>> {
    px.check_against(model)?;
    let a = model.sizes();
    let mut mass = Vec::with_capacity(a.x * a.t);
    for x in 0..a.x {
        for t in 0..a.t {
            mass.push(px.probs()[x] * model.t_given_x(x, t));
        }
    }
    Ok(JointXT {
        x_size: a.x,
        t_size: a.t,
        mass,
    })
}

/// Posterior `P_{S|XT}(s|x,t)`, row-major `[x][t][s]`. Rows whose
/// conditioning event has probability zero are flagged undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorS<T> {
    t_size: usize,
    s_size: usize,
    probs: Vec<T>,
    defined: Vec<bool>,
}

impl<T: Real> PosteriorS<T> {
    /// Posterior row at `(x, t)`, or `None` when `P_{T|X}(t|x) = 0`.
    pub fn get(&self, x: usize, t: usize) -> Option<&[T]> {
        let cell = x * self.t_size + t;
        if self.defined[cell] {
            Some(&self.probs[cell * self.s_size..(cell + 1) * self.s_size])
        } else {
            None
        }
    }

    pub fn is_defined(&self, x: usize, t: usize) -> bool {
        self.defined[x * self.t_size + t]
    }
}

/// Bayes rule `P_S(s) P_{T|XS}(t|x,s) / sum_s' P_S(s') P_{T|XS}(t|x,s')`.
pub fn posterior_s_given_xt<T: Real>(model: &SdmcModel<T>) -> PosteriorS<T> {
    let a = model.sizes();
    let mut probs = vec![T::zero(); a.x * a.t * a.s];
    let mut defined = vec![false; a.x * a.t];
    for x in 0..a.x {
        for t in 0..a.t {
            let norm = model.t_given_x(x, t);
            if norm <= T::zero() {
                continue;
            }
            let cell = x * a.t + t;
            defined[cell] = true;
            for s in 0..a.s {
                probs[cell * a.s + s] = model.state_prior()[s] * model.sensing(x, s, t) / norm;
            }
        }
    }
    PosteriorS {
        t_size: a.t,
        s_size: a.s,
        probs,
        defined,
    }
}

/// Posterior expected distortion `E[d(S,z)|x,t]`, row-major `[x][t][z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorLoss<T> {
    x_size: usize,
    t_size: usize,
    z_size: usize,
    loss: Vec<T>,
    defined: Vec<bool>,
}

impl<T: Real> PosteriorLoss<T> {
    pub fn for_model(model: &SdmcModel<T>) -> Self {
        model.posterior_loss(&posterior_s_given_xt(model))
    }

    /// Loss row at `(x, t)`, or `None` for a probability-zero observation.
    #[inline]
    pub fn row(&self, x: usize, t: usize) -> Option<&[T]> {
        let cell = x * self.t_size + t;
        if self.defined[cell] {
            Some(&self.loss[cell * self.z_size..(cell + 1) * self.z_size])
        } else {
            None
        }
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
}

/// `I(T;Z|X)` in nats, as the conditional divergence between the kernel and
/// its induced marginal `P_{Z|X}`, weighted by `P_{XT}`.
pub fn conditional_mutual_information<T: Real>(
    joint: &JointXT<T>,
    kernel: &EstimatorKernel<T>,
) -> Result<T> {
    let (nx, nt, nz) = (joint.x_size(), joint.t_size(), kernel.z_size());
    if kernel.x_size() != nx || kernel.t_size() != nt {
        return Err(Error::validation("kernel", "dimensions do not match the joint"));
    }
    let mut total = T::zero();
    let mut zx = vec![T::zero(); nz];
    for x in 0..nx {
        let px: T = joint.row(x).iter().copied().sum();
        if px <= T::zero() {
            continue;
        }
        zx.iter_mut().for_each(|v| *v = T::zero());
        for t in 0..nt {
            let w = joint.get(x, t);
            if w <= T::zero() {
                continue;
            }
            for (z, m) in zx.iter_mut().enumerate() {
                *m = *m + w * kernel.get(x, t, z);
            }
        }
        for t in 0..nt {
            let w = joint.get(x, t);
            if w <= T::zero() {
                continue;
            }
            for (z, &m) in zx.iter().enumerate() {
                let p = kernel.get(x, t, z);
                // w p may underflow for vanishing kernel entries; such terms
                // contribute nothing
                if w * p <= T::zero() {
                    continue;
                }
                if m <= T::zero() {
                    return Err(Error::Internal(format!(
                        "kernel puts mass on z={z} at (x={x}, t={t}) but the induced P_Z|X is zero"
                    )));
                }
                // ln(P(z|x,t) / P(z|x)) with P(z|x) = m / px
                total = total + w * p * (p * px / m).ln();
            }
        }
    }
    Ok(total.max(T::zero()))
}

/// `E[d(S,Z)]` by direct summation over `(x, s, t, z)`.
pub fn expected_distortion<T: Real>(
    model: &SdmcModel<T>,
    px: &InputDist<T>,
    kernel: &EstimatorKernel<T>,
) -> Result<T> {
    px.check_against(model)?;
    kernel.check_against(model)?;
    let a = model.sizes();
    let mut total = T::zero();
    for x in 0..a.x {
        let wx = px.probs()[x];
        if wx <= T::zero() {
            continue;
        }
        for s in 0..a.s {
            let ws = wx * model.state_prior()[s];
            if ws <= T::zero() {
                continue;
            }
            for t in 0..a.t {
                let wt = ws * model.sensing(x, s, t);
                if wt <= T::zero() {
                    continue;
                }
                for z in 0..a.z {
                    total = total + wt * kernel.get(x, t, z) * model.distortion(s, z);
                }
            }
        }
    }
    Ok(total)
}
