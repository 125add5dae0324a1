//! Capacity of the communication link under a sensing-cost budget `D0` and a
//! transmit-cost budget `B`:
//!
//! ```text
//! C(D0, B) = max I(X;Y|S)  over  P_X with E[c(X)] <= D0, E[b(X)] <= B
//! ```
//!
//! where `c(x)` is the sensing cost of the minimum-distortion estimator. The
//! inner problem `max I(X;Y|S) - lc E[c] - lb E[b]` is solved by the
//! multiplicative Blahut update; the multipliers are found by bisection
//! (`lc` nested inside `lb`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::build_deterministic_estimator;
use crate::model::{InputDist, SdmcModel};
use crate::scalar::Real;

const LAMBDA_CAP: f64 = 1e12;
const BUDGET_TOL: f64 = 1e-10;

/// One point of the capacity-distortion tradeoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CapacityPoint<T> {
    /// Sensing-cost budget.
    pub d0: T,
    /// Transmit-cost budget, `+inf` when unconstrained.
    pub b: T,
    pub capacity_bits: T,
    pub px_star: InputDist<T>,
    pub sensing_cost_attained: T,
    pub input_cost_attained: T,
    pub lambda_c: T,
    pub lambda_b: T,
    pub converged: bool,
}

/// `I(X;Y|S) = sum_s P_S(s) I(X;Y|S=s)` in bits, using the communication
/// kernel.
pub fn conditional_mi_xy_given_s<T: Real>(model: &SdmcModel<T>, px: &InputDist<T>) -> Result<T> {
    px.check_against(model)?;
    let div = input_divergences(model, px.probs());
    let nats: T = px
        .probs()
        .iter()
        .zip(&div)
        .filter(|(&p, _)| p > T::zero())
        .map(|(&p, &d)| p * d)
        .sum();
    Ok(nats.max(T::zero()).nats_to_bits())
}

/// `D_x = sum_s P_S(s) D(P_{Y|XS}(.|x,s) || P_{Y|S}(.|s))` in nats.
fn input_divergences<T: Real>(model: &SdmcModel<T>, px: &[T]) -> Vec<T> {
    let a = model.sizes();
    let mut y_given_s = vec![T::zero(); a.s * a.y];
    for s in 0..a.s {
        for x in 0..a.x {
            if px[x] <= T::zero() {
                continue;
            }
            for y in 0..a.y {
                y_given_s[s * a.y + y] = y_given_s[s * a.y + y] + px[x] * model.comm(x, s, y);
            }
        }
    }
    (0..a.x)
        .map(|x| {
            let mut acc = T::zero();
            for s in 0..a.s {
                let ps = model.state_prior()[s];
                if ps <= T::zero() {
                    continue;
                }
                for y in 0..a.y {
                    let w = model.comm(x, s, y);
                    if w <= T::zero() {
                        continue;
                    }
                    let m = y_given_s[s * a.y + y];
                    acc = acc
                        + if m > T::zero() {
                            ps * w * (w / m).ln()
                        } else {
                            T::infinity()
                        };
                }
            }
            acc
        })
        .collect()
}

/// Smallest `E[c(X)]` over distributions with `E[b(X)] <= budget`, or `None`
/// when no distribution meets the transmit budget. The optimum of this
/// one-constraint linear program sits on at most two inputs, so it is found
/// by enumerating singletons and budget-tight pairs.
pub fn min_sensing_cost_given_budget<T: Real>(c: &[T], b: &[T], budget: T) -> Option<T> {
    let mut best: Option<T> = None;
    let mut offer = |v: T| best = Some(best.map_or(v, |b: T| b.min(v)));
    for i in 0..c.len() {
        if b[i] <= budget {
            offer(c[i]);
            for j in 0..c.len() {
                if b[j] > budget {
                    let w = (budget - b[i]) / (b[j] - b[i]);
                    offer(c[i] + w * (c[j] - c[i]));
                }
            }
        }
    }
    best
}

struct Tilted<T> {
    px: Vec<T>,
    sensing: T,
    input: T,
    converged: bool,
}

struct Solver<'a, T> {
    model: &'a SdmcModel<T>,
    c: Vec<T>,
    support: Vec<bool>,
    tol: T,
    max_iter: usize,
}

impl<T: Real> Solver<'_, T> {
    /// `E[f(X)]`; unused inputs are skipped so an infinite `f` there is harmless.
    fn expect(&self, px: &[T], f: impl Fn(usize) -> T) -> T {
        px.iter()
            .enumerate()
            .filter(|(_, &p)| p > T::zero())
            .map(|(x, &p)| p * f(x))
            .sum()
    }

    /// Maximizes `I(X;Y|S) - lc E[c] - lb E[b]` over the support.
    fn tilted(&self, lc: T, lb: T) -> Tilted<T> {
        let n = self.support.iter().filter(|&&s| s).count();
        let mut px: Vec<T> = self
            .support
            .iter()
            .map(|&s| if s { T::one() / T::from_count(n) } else { T::zero() })
            .collect();
        let mut converged = false;
        for _ in 0..self.max_iter {
            let div = input_divergences(self.model, &px);
            let g: Vec<T> = (0..px.len())
                .map(|x| div[x] - lc * self.c[x] - lb * self.model.input_cost(x))
                .collect();
            let top = (0..px.len())
                .filter(|&x| self.support[x])
                .map(|x| g[x])
                .fold(T::neg_infinity(), T::max);
            let mean = self.expect(&px, |x| g[x]);
            if top - mean <= self.tol {
                converged = true;
                break;
            }
            let mut norm = T::zero();
            for x in 0..px.len() {
                if self.support[x] && px[x] > T::zero() {
                    px[x] = px[x] * (g[x] - top).exp();
                    norm = norm + px[x];
                }
            }
            px.iter_mut().for_each(|p| *p = *p / norm);
        }
        Tilted {
            sensing: self.expect(&px, |x| self.c[x]),
            input: self.expect(&px, |x| self.model.input_cost(x)),
            px,
            converged,
        }
    }

    /// Smallest `lc` whose tilted optimum meets the sensing budget.
    fn meet_sensing(&self, d0: T, lb: T) -> (Tilted<T>, T, bool) {
        let slack = T::floor_tol(BUDGET_TOL);
        let free = self.tilted(T::zero(), lb);
        if free.sensing <= d0 + slack {
            return (free, T::zero(), true);
        }
        bisect_multiplier(|l| self.tilted(l, lb), |t| t.sensing, d0)
    }
}

/// Bisection on a nonnegative multiplier so that `measure` (non-increasing in
/// the multiplier) meets `budget`. Returns the feasible-side solution.
fn bisect_multiplier<T: Real, S>(
    solve: impl Fn(T) -> S,
    measure: impl Fn(&S) -> T,
    budget: T,
) -> (S, T, bool) {
    let slack = T::floor_tol(BUDGET_TOL);
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut feasible = solve(hi);
    while measure(&feasible) > budget + slack {
        lo = hi;
        hi = hi * T::lit(4.0);
        if hi > T::lit(LAMBDA_CAP) {
            return (feasible, lo, false);
        }
        feasible = solve(hi);
    }
    for _ in 0..200 {
        if budget - measure(&feasible) <= slack || hi - lo <= T::floor_tol(1e-14) * hi {
            return (feasible, hi, true);
        }
        let mid = (lo + hi) * T::lit(0.5);
        let s = solve(mid);
        if measure(&s) > budget + slack {
            lo = mid;
        } else {
            hi = mid;
            feasible = s;
        }
    }
    (feasible, hi, false)
}

/// Maximizes `I(X;Y|S)` over `P*(d0, b)`. `b = +inf` disables the transmit
/// budget. `tol` bounds the duality gap of each inner Blahut run (nats).
pub fn blahut_capacity_cost<T: Real>(
    model: &SdmcModel<T>,
    d0: T,
    b: T,
    tol: T,
    max_iter: usize,
) -> Result<CapacityPoint<T>> {
    if !(d0 >= T::zero()) || !(b >= T::zero()) {
        return Err(Error::Domain(format!("budgets must be nonnegative, got D0={d0}, B={b}")));
    }
    if !(tol > T::zero()) || max_iter == 0 {
        return Err(Error::Domain("tol and max_iter must be positive".into()));
    }
    let c = build_deterministic_estimator(model).sensing_costs().to_vec();
    let bc = model.input_costs();
    let edge = T::floor_tol(1e-12);

    match min_sensing_cost_given_budget(&c, bc, b) {
        None => {
            return Err(Error::Infeasible(format!(
                "no input distribution meets the transmit budget B={b}"
            )))
        }
        Some(m) if m > d0 + edge => {
            return Err(Error::Infeasible(format!(
                "sensing budget D0={d0} is below the smallest attainable sensing cost {m}"
            )))
        }
        Some(_) => {}
    }

    // budgets sitting exactly on the cheapest inputs: restrict the support
    let mut support = vec![true; c.len()];
    let c_min = c.iter().copied().fold(T::infinity(), T::min);
    let sensing_pinned = d0 <= c_min + edge;
    if sensing_pinned {
        support.iter_mut().zip(&c).for_each(|(s, &cx)| *s = cx <= c_min + edge);
    }
    let b_min = (0..c.len())
        .filter(|&x| support[x])
        .map(|x| bc[x])
        .fold(T::infinity(), T::min);
    let input_pinned = b <= b_min + edge;
    if input_pinned {
        for x in 0..c.len() {
            support[x] = support[x] && bc[x] <= b_min + edge;
        }
    }
    if !support.iter().any(|&s| s) {
        return Err(Error::Infeasible(
            "no input meets both budgets at their lower limits".into(),
        ));
    }

    let solver = Solver {
        model,
        c,
        support,
        tol,
        max_iter,
    };
    let d0_eff = if sensing_pinned { T::infinity() } else { d0 };
    let slack = T::floor_tol(BUDGET_TOL);

    let (sol, lambda_c, lambda_b, ok) = if input_pinned || !b.is_finite() {
        let (s, lc, ok) = solver.meet_sensing(d0_eff, T::zero());
        (s, lc, T::zero(), ok)
    } else {
        let (free, lc0, ok0) = solver.meet_sensing(d0_eff, T::zero());
        if free.input <= b + slack {
            (free, lc0, T::zero(), ok0)
        } else {
            let ((s, lc, ok_c), lb, ok_b) = bisect_multiplier(
                |lb| solver.meet_sensing(d0_eff, lb),
                |r: &(Tilted<T>, T, bool)| r.0.input,
                b,
            );
            (s, lc, lb, ok_c && ok_b)
        }
    };

    let px_star = InputDist::from_normalized(sol.px);
    Ok(CapacityPoint {
        d0,
        b,
        capacity_bits: conditional_mi_xy_given_s(model, &px_star)?,
        sensing_cost_attained: sol.sensing,
        input_cost_attained: sol.input,
        px_star,
        lambda_c,
        lambda_b,
        converged: ok && sol.converged,
    })
}

/// One capacity point per budget in the ascending grid `d0_grid`.
pub fn capacity_distortion_curve<T: Real>(
    model: &SdmcModel<T>,
    d0_grid: &[T],
    b: T,
    tol: T,
    max_iter: usize,
) -> Result<Vec<CapacityPoint<T>>> {
    if d0_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Domain("D0 grid must be sorted ascending".into()));
    }
    let points: Vec<CapacityPoint<T>> = d0_grid
        .par_iter()
        .map(|&d0| blahut_capacity_cost(model, d0, b, tol, max_iter))
        .collect::<Result<_>>()?;
    let slack = T::floor_tol(1e-7);
    if let Some(w) = points
        .windows(2)
        .find(|w| w[1].capacity_bits + slack < w[0].capacity_bits)
    {
        return Err(Error::Internal(format!(
            "capacity decreased from {} to {} between D0={} and D0={}",
            w[0].capacity_bits, w[1].capacity_bits, w[0].d0, w[1].d0
        )));
    }
    Ok(points)
}
