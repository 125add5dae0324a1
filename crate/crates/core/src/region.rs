//! Outer-bound surface of the capacity-rate-distortion region.
//!
//! For every sensing budget `D0` the capacity-achieving input `P_X*` is
//! computed, and the whole estimator rate-distortion curve under that input
//! is attached to it. Each emitted `(C, R, D)` triple satisfies
//! `C <= max I(X;Y|S)`, `R >= R(D)` and `D >= E[d(S, Z)]` for that input.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{blahut_capacity_cost, CapacityPoint};
use crate::error::{Error, Result};
use crate::estimator::minimum_distortion;
use crate::export::{flag, num, write_csv};
use crate::model::{InputDist, SdmcModel};
use crate::rd_ba::{trace_curve, BaConfig, RdCurve};
use crate::scalar::{InfoUnit, Real};

/// Solver settings for a region sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionConfig<T> {
    pub capacity_tol: T,
    pub capacity_max_iter: usize,
    /// Settings of every rate-distortion solve (`mu` is taken from the grid).
    pub ba: BaConfig<T>,
}

impl<T: Real> Default for RegionConfig<T> {
    fn default() -> Self {
        RegionConfig {
            capacity_tol: T::floor_tol(1e-12),
            capacity_max_iter: 100_000,
            ba: BaConfig::default(),
        }
    }
}

/// One `(C, R, D)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RegionPoint<T> {
    pub d0: T,
    pub b: T,
    pub c_bits: T,
    pub px_star: InputDist<T>,
    pub d_min: T,
    pub d: T,
    pub r_bits: T,
    pub mu: T,
    /// Both the capacity search and this rate-distortion solve converged.
    pub converged: bool,
}

/// Everything computed for one sensing budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RegionGroup<T> {
    pub capacity: CapacityPoint<T>,
    pub d_min: T,
    pub curve: RdCurve<T>,
}

/// A budget that was left out of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SkippedBudget<T> {
    pub d0: T,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RegionProvenance<T> {
    pub model_fingerprint: u64,
    pub b: T,
    pub d0_grid: Vec<T>,
    pub mu_grid: Vec<T>,
}

/// Groups in ascending `D0` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RegionSurface<T> {
    pub groups: Vec<RegionGroup<T>>,
    pub skipped: Vec<SkippedBudget<T>>,
    pub provenance: RegionProvenance<T>,
}

impl<T: Real> RegionSurface<T> {
    /// All triples, sorted by `(D0, D)`.
    pub fn points(&self) -> Vec<RegionPoint<T>> {
        self.groups
            .iter()
            .flat_map(|g| {
                g.curve.points.iter().map(move |p| RegionPoint {
                    d0: g.capacity.d0,
                    b: g.capacity.b,
                    c_bits: g.capacity.capacity_bits,
                    px_star: g.capacity.px_star.clone(),
                    d_min: g.d_min,
                    d: p.distortion,
                    r_bits: p.rate_bits,
                    mu: p.mu,
                    converged: g.capacity.converged && p.converged,
                })
            })
            .collect()
    }

    pub fn all_converged(&self) -> bool {
        self.groups
            .iter()
            .all(|g| g.capacity.converged && g.curve.all_converged)
    }
}

/// Sweeps the sensing budgets in `d0_grid` (ascending). Budgets with an
/// empty constraint set are recorded in `skipped`; any other failure aborts.
pub fn sweep_region<T: Real>(
    model: &SdmcModel<T>,
    d0_grid: &[T],
    b: T,
    mu_grid: &[T],
    cfg: &RegionConfig<T>,
) -> Result<RegionSurface<T>> {
    if d0_grid.is_empty() || mu_grid.is_empty() {
        return Err(Error::Domain("D0 and mu grids must be nonempty".into()));
    }
    if d0_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Domain("D0 grid must be sorted ascending".into()));
    }
    let outcomes: Vec<Result<Result<RegionGroup<T>, String>>> = d0_grid
        .par_iter()
        .map(|&d0| {
            let capacity =
                match blahut_capacity_cost(model, d0, b, cfg.capacity_tol, cfg.capacity_max_iter) {
                    Ok(c) => c,
                    Err(e @ Error::Infeasible(_)) => return Ok(Err(e.to_string())),
                    Err(e) => return Err(e),
                };
            let d_min = minimum_distortion(model, &capacity.px_star)?;
            let curve = trace_curve(model, &capacity.px_star, mu_grid, &cfg.ba)?;
            Ok(Ok(RegionGroup {
                capacity,
                d_min,
                curve,
            }))
        })
        .collect();

    let mut groups = Vec::new();
    let mut skipped = Vec::new();
    for (&d0, outcome) in d0_grid.iter().zip(outcomes) {
        match outcome? {
            Ok(g) => groups.push(g),
            Err(reason) => skipped.push(SkippedBudget { d0, reason }),
        }
    }
    Ok(RegionSurface {
        groups,
        skipped,
        provenance: RegionProvenance {
            model_fingerprint: model.fingerprint(),
            b,
            d0_grid: d0_grid.to_vec(),
            mu_grid: mu_grid.to_vec(),
        },
    })
}

/// `D0,B,C_<unit>,Dmin,D,R_<unit>,converged`, rows sorted by `(D0, D)`.
pub fn export_region<T: Real>(surface: &RegionSurface<T>, unit: InfoUnit) -> Result<String> {
    if surface.groups.is_empty() {
        return Err(Error::Infeasible("region surface is empty".into()));
    }
    let u = unit.suffix();
    let header: Vec<String> = ["D0", "B", &format!("C_{u}"), "Dmin", "D", &format!("R_{u}"), "converged"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut points = surface.points();
    points.sort_by(|a, b| {
        a.d0.partial_cmp(&b.d0)
            .unwrap()
            .then(a.d.partial_cmp(&b.d).unwrap())
    });
    write_csv(
        &header,
        points.iter().map(|p| {
            vec![
                num(p.d0),
                num(p.b),
                num(unit.from_bits(p.c_bits)),
                num(p.d_min),
                num(p.d),
                num(unit.from_bits(p.r_bits)),
                flag(p.converged).to_string(),
            ]
        }),
    )
}
