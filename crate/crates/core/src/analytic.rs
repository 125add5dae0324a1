//! Closed-form reference values and builders for the standard example
//! channels.
//!
//! * Binary channel with multiplicative Bernoulli state: `Y = T = S X`,
//!   Hamming distortion. With `P_X(0) = p` and `m = min{q, 1-q}` the estimator
//!   rate-distortion function is
//!   `(1-p) (H_b(q) - H_b((D - p m) / (1-p)))` for `p m <= D <= m`, and the
//!   state-conditional mutual information is `q H_b(p)`.
//! * Product channel on `{0,1,2,3}^2` with outputs the seven distinct
//!   products.
//! * Real Gaussian echo channel `T = S X + N` with a deterministic waveform
//!   or a uniformly weighted PAM constellation (closed form only).

use crate::error::{Error, Result};
use crate::model::{Alphabets, ChannelSpec, Labels, SdmcModel};
use crate::scalar::Real;

/// `-p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy<T: Real>(p: T) -> Result<T> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Domain(format!("binary entropy needs p in [0,1], got {p}")));
    }
    Ok(-(p.xlnx() + (T::one() - p).xlnx()).nats_to_bits())
}

fn check_p_half<T: Real>(p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::lit(0.5)) {
        return Err(Error::Domain(format!("p must lie in [0, 1/2], got {p}")));
    }
    Ok(())
}

fn check_q<T: Real>(q: T) -> Result<()> {
    if !(q >= T::zero() && q <= T::one()) {
        return Err(Error::Domain(format!("q must lie in [0, 1], got {q}")));
    }
    Ok(())
}

/// Estimator rate-distortion function (bits) of the binary multiplicative
/// channel with `P_X(0) = p`, valid for `p min{q,1-q} <= d <= min{q,1-q}`.
pub fn corollary1_rate<T: Real>(p: T, q: T, d: T) -> Result<T> {
    check_p_half(p)?;
    check_q(q)?;
    let m = q.min(T::one() - q);
    let lo = p * m;
    let slack = T::floor_tol(1e-12);
    if d < lo - slack {
        return Err(Error::Domain(format!(
            "distortion {d} is below the minimum {lo} (infeasible)"
        )));
    }
    if d > m + slack {
        return Err(Error::Domain(format!(
            "distortion {d} is above the zero-rate distortion {m}"
        )));
    }
    let inner = ((d - lo) / (T::one() - p)).max(T::zero()).min(m);
    Ok(((T::one() - p) * (binary_entropy(q)? - binary_entropy(inner)?)).max(T::zero()))
}

/// `q H_b(p)` bits: state-conditional mutual information of the binary
/// multiplicative channel at `P_X(0) = p`.
pub fn corollary1_capacity<T: Real>(p: T, q: T) -> Result<T> {
    check_p_half(p)?;
    check_q(q)?;
    Ok(q * binary_entropy(p)?)
}

/// Sensing-cost constrained capacity of the binary multiplicative channel:
/// `q H_b(min(1/2, d0 / min{q,1-q}))` bits.
pub fn binary_capacity_distortion<T: Real>(q: T, d0: T) -> Result<T> {
    check_q(q)?;
    if !(d0 >= T::zero()) {
        return Err(Error::Domain(format!("budget must be nonnegative, got {d0}")));
    }
    let m = q.min(T::one() - q);
    let p = if m > T::zero() { (d0 / m).min(T::lit(0.5)) } else { T::lit(0.5) };
    Ok(q * binary_entropy(p)?)
}

/// Parameters of the Gaussian echo channel `T = S X + N`, linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSensingParams<T> {
    pub sigma_s2: T,
    pub sigma_n2: T,
    pub power: T,
}

impl<T: Real> GaussianSensingParams<T> {
    pub fn new(sigma_s2: T, sigma_n2: T, power: T) -> Result<Self> {
        for (name, v) in [("sigma_s2", sigma_s2), ("sigma_n2", sigma_n2), ("power", power)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            sigma_s2,
            sigma_n2,
            power,
        })
    }

    /// Unit variances and the given power in dB.
    pub fn unit_with_power_db(power_db: T) -> Result<Self> {
        Self::new(T::one(), T::one(), db_to_linear(power_db))
    }
}

pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// MMSE of estimating `S` from `x S + N`: the infimum distortion at which the
/// deterministic-waveform rate diverges.
pub fn mmse_endpoint<T: Real>(x: T, params: &GaussianSensingParams<T>) -> T {
    let g = x * x * params.sigma_s2;
    g * params.sigma_n2 / (g + params.sigma_n2)
}

/// Rate-distortion function (bits) for a fixed amplitude `x`:
/// `1/2 log2(x^4 s^4 / (d (x^2 s^2 + n^2) - x^2 s^2 n^2))` on
/// `(mmse, x^2 s^2]`, `0` above and `+inf` at or below the MMSE endpoint.
pub fn gaussian_det_rd<T: Real>(x: T, params: &GaussianSensingParams<T>, d: T) -> T {
    let g = x * x * params.sigma_s2;
    if d > g {
        return T::zero();
    }
    if d <= mmse_endpoint(x, params) {
        return T::infinity();
    }
    let denom = d * (g + params.sigma_n2) - g * params.sigma_n2;
    if denom <= T::zero() {
        return T::infinity();
    }
    (T::lit(0.5) * (g * g / denom).log2()).max(T::zero())
}

/// Uniform `M`-ary PAM constellation `{(2m - 1 - M) k}` with
/// `k = sqrt(3P / (M^2 - 1))`, so the mean power is `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PamConstellation<T> {
    pub order: usize,
    pub spacing: T,
    pub amplitudes: Vec<T>,
}

impl<T: Real> PamConstellation<T> {
    pub fn mean_power(&self) -> T {
        self.amplitudes.iter().map(|&a| a * a).sum::<T>() / T::from_count(self.order)
    }
}

pub fn pam_constellation<T: Real>(order: usize, power: T) -> Result<PamConstellation<T>> {
    if order < 2 || order % 2 != 0 {
        return Err(Error::Domain(format!("PAM order must be even and >= 2, got {order}")));
    }
    if !(power > T::zero() && power.is_finite()) {
        return Err(Error::Domain(format!("power must be positive, got {power}")));
    }
    let m = T::from_count(order);
    let spacing = (T::lit(3.0) * power / (m * m - T::one())).sqrt();
    let amplitudes = (1..=order)
        .map(|i| (T::from_count(2 * i) - T::one() - m) * spacing)
        .collect();
    Ok(PamConstellation {
        order,
        spacing,
        amplitudes,
    })
}

/// Smallest distortion at which the uniform mixture is defined:
/// `max_x mmse(x)`.
pub fn mixture_validity_threshold<T: Real>(
    constellation: &PamConstellation<T>,
    params: &GaussianSensingParams<T>,
) -> T {
    constellation
        .amplitudes
        .iter()
        .map(|&x| mmse_endpoint(x, params))
        .fold(T::zero(), T::max)
}

/// `(1/M) sum_x R_x(d)` for the uniformly weighted constellation (bits).
pub fn gaussian_mixture_rd<T: Real>(
    constellation: &PamConstellation<T>,
    params: &GaussianSensingParams<T>,
    d: T,
) -> Result<T> {
    let threshold = mixture_validity_threshold(constellation, params);
    if !(d >= threshold) {
        return Err(Error::Domain(format!(
            "distortion {d} is below the mixture validity threshold {threshold}"
        )));
    }
    let sum: T = constellation
        .amplitudes
        .iter()
        .map(|&x| gaussian_det_rd(x, params, d))
        .sum();
    Ok(sum / T::from_count(constellation.order))
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Returns `None` when the
/// endpoints have the same sign.
pub fn bisect_sign_change<T: Real>(f: impl Fn(T) -> T, lo: T, hi: T, tol: T) -> Option<T> {
    let (mut lo, mut hi) = (lo, hi);
    let (flo, fhi) = (f(lo), f(hi));
    if flo == T::zero() {
        return Some(lo);
    }
    if fhi == T::zero() {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    let neg_at_lo = flo < T::zero();
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        let fm = f(mid);
        if fm == T::zero() {
            return Some(mid);
        }
        if (fm < T::zero()) == neg_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((lo + hi) * T::lit(0.5))
}

fn hamming<T: Real>(n: usize) -> Vec<Vec<T>> {
    (0..n)
        .map(|s| (0..n).map(|z| if s == z { T::zero() } else { T::one() }).collect())
        .collect()
}

fn names(values: impl IntoIterator<Item = usize>) -> Vec<String> {
    values.into_iter().map(|v| v.to_string()).collect()
}

/// Binary channel `Y = T = S X` with Bernoulli-`q` state, Hamming distortion
/// and zero input cost.
pub fn build_binary_multiplicative_channel<T: Real>(q: T) -> Result<SdmcModel<T>> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::Domain(format!("state probability must lie in (0,1), got {q}")));
    }
    let kernel: Vec<Vec<Vec<T>>> = (0..2)
        .map(|x| {
            (0..2)
                .map(|s| (0..2).map(|t| if t == s * x { T::one() } else { T::zero() }).collect())
                .collect()
        })
        .collect();
    SdmcModel::new(ChannelSpec {
        alphabets: Alphabets {
            x: 2,
            s: 2,
            t: 2,
            y: 2,
            z: 2,
        },
        state_prior: vec![T::one() - q, q],
        sensing_kernel: kernel.clone(),
        comm_kernel: kernel,
        distortion: hamming(2),
        input_cost: None,
        labels: None,
    })
}

/// Distinct products `x s` for `x, s in {0,1,2,3}`, ascending.
pub const PRODUCT_OUTPUTS: [usize; 7] = [0, 1, 2, 3, 4, 6, 9];

/// Channel `Y = T = S X` on `X = S = Z = {0,1,2,3}`; the output alphabet is
/// the seven distinct products (labels carry the product values).
pub fn build_product_dmc<T: Real>(state_prior: &[T]) -> Result<SdmcModel<T>> {
    if state_prior.len() != 4 {
        return Err(Error::validation(
            "state_prior",
            format!("product channel needs 4 state probabilities, got {}", state_prior.len()),
        ));
    }
    let index = |v: usize| PRODUCT_OUTPUTS.iter().position(|&p| p == v).expect("product in table");
    let kernel: Vec<Vec<Vec<T>>> = (0..4)
        .map(|x| {
            (0..4)
                .map(|s| {
                    let hit = index(x * s);
                    (0..7).map(|t| if t == hit { T::one() } else { T::zero() }).collect()
                })
                .collect()
        })
        .collect();
    SdmcModel::new(ChannelSpec {
        alphabets: Alphabets {
            x: 4,
            s: 4,
            t: 7,
            y: 7,
            z: 4,
        },
        state_prior: state_prior.to_vec(),
        sensing_kernel: kernel.clone(),
        comm_kernel: kernel,
        distortion: hamming(4),
        input_cost: None,
        labels: Some(Labels {
            t: Some(names(PRODUCT_OUTPUTS)),
            y: Some(names(PRODUCT_OUTPUTS)),
            ..Labels::default()
        }),
    })
}

/// Index of the output symbol for input `x` and state `s` in
/// [`build_product_dmc`] models.
pub fn product_output_index(x: usize, s: usize) -> Option<usize> {
    PRODUCT_OUTPUTS.iter().position(|&p| p == x * s)
}
