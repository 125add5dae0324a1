//! Command-line front end.
//!
//! Every subcommand reads a channel either from a JSON document (`--spec`)
//! or from a builtin builder (`--builtin`), runs one computation and writes
//! CSV to `--out` (standard output when absent). A short summary goes to
//! standard output, or to standard error when the CSV itself is printed.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytic::{
    bisect_sign_change, build_binary_multiplicative_channel, build_product_dmc, gaussian_det_rd,
    gaussian_mixture_rd, mixture_validity_threshold, mmse_endpoint, pam_constellation,
    GaussianSensingParams,
};
use crate::capacity::{blahut_capacity_cost, capacity_distortion_curve};
use crate::error::{Error, Result};
use crate::estimator::{
    build_deterministic_estimator, minimum_distortion, simulate_empirical_distortion,
    zero_rate_distortion,
};
use crate::export::{capacity_csv, curve_csv, fmt_sig, input_dist_csv, write_csv};
use crate::model::{expected_distortion, load_channel_spec, InputDist, SdmcModel};
use crate::rd_ba::{default_mu_grid, geometric_grid, solve_fixed_mu, trace_curve, BaConfig};
use crate::region::{export_region, sweep_region, RegionConfig};
use crate::scalar::InfoUnit;

#[derive(Debug, Parser)]
#[command(
    name = "sdmc-rd",
    version,
    about = "Rate-distortion, capacity and tradeoff regions of state-dependent memoryless channels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace the estimator rate-distortion curve R(D) for a fixed input law.
    RdCurve(RdCurveArgs),
    /// Capacity under a sensing-cost budget D0 (and optional input-cost budget B).
    Capacity(CapacityArgs),
    /// Capacity-rate-distortion outer-bound surface over a D0 grid.
    Region(RegionArgs),
    /// Closed-form Gaussian rate-distortion curves.
    Gaussian(GaussianArgs),
    /// Validate a channel and print a summary.
    Validate(ValidateArgs),
    /// Print a channel as a JSON document.
    Spec(ValidateArgs),
    /// Monte-Carlo estimate of the distortion of an estimator.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    /// Binary channel Y = T = S X with Bernoulli(q) state.
    BinaryMult,
    /// 4-ary product channel Y = T = S X.
    ProductDmc,
}

#[derive(Debug, Args)]
#[group(skip)]
pub struct ChannelArgs {
    /// Channel document (JSON).
    #[arg(long, value_name = "PATH", required_unless_present = "builtin", conflicts_with = "builtin")]
    pub spec: Option<PathBuf>,
    /// Builtin channel.
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    /// State probability P_S(1) of `binary-mult`.
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// State prior of `product-dmc` (uniform when absent).
    #[arg(long, value_delimiter = ',', value_name = "P0,P1,P2,P3")]
    pub state_prior: Option<Vec<f64>>,
}

impl ChannelArgs {
    pub fn load(&self) -> Result<SdmcModel<f64>> {
        match (&self.spec, self.builtin) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Parse(format!("cannot read {}: {e}", path.display()))
                })?;
                load_channel_spec(&text)
            }
            (None, Some(Builtin::BinaryMult)) => build_binary_multiplicative_channel(self.q),
            (None, Some(Builtin::ProductDmc)) => {
                let prior = self.state_prior.clone().unwrap_or_else(|| vec![0.25; 4]);
                build_product_dmc(&prior)
            }
            _ => Err(Error::Domain("give exactly one of --spec or --builtin".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Stopping tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Iteration cap of each inner solve.
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Unit of rates and capacities.
    #[arg(long, default_value = "bits")]
    pub unit: InfoUnit,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:n, got `{s}`"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
        let n = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("`{}`: {e}", parts[2]))?;
        let g = GridSpec {
            lo: num(parts[0])?,
            hi: num(parts[1])?,
            n,
        };
        if n == 0 || !g.lo.is_finite() || !g.hi.is_finite() || g.lo > g.hi {
            return Err(format!("grid `{s}` needs finite lo <= hi and n >= 1"));
        }
        Ok(g)
    }
}

impl GridSpec {
    pub fn linear(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Args)]
pub struct MuArgs {
    /// Explicit slopes (all <= 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "mu_grid")]
    pub mu: Option<Vec<f64>>,
    /// Geometric slope grid `lo:hi:n` (both ends negative); 0 is appended.
    #[arg(long, allow_hyphen_values = true)]
    pub mu_grid: Option<GridSpec>,
}

impl MuArgs {
    pub fn grid(&self) -> Result<Vec<f64>> {
        let mut g = match (&self.mu, &self.mu_grid) {
            (Some(list), _) => list.clone(),
            (None, Some(spec)) => {
                if !(spec.hi < 0.0) {
                    return Err(Error::Domain(
                        "--mu-grid endpoints must both be negative".into(),
                    ));
                }
                let mut g = geometric_grid(spec.lo, spec.hi, spec.n);
                g.push(0.0);
                g
            }
            (None, None) => default_mu_grid(),
        };
        if let Some(bad) = g.iter().find(|m| !(**m <= 0.0)) {
            return Err(Error::Domain(format!("slopes must be <= 0, got {bad}")));
        }
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g.dedup();
        Ok(g)
    }
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Sensing-cost budgets.
    #[arg(long, value_delimiter = ',', conflicts_with = "d0_grid")]
    pub d0: Option<Vec<f64>>,
    /// Linear sensing-budget grid `lo:hi:n`.
    #[arg(long)]
    pub d0_grid: Option<GridSpec>,
    /// Input-cost budget; unconstrained when absent.
    #[arg(long)]
    pub b: Option<f64>,
}

impl BudgetArgs {
    fn b(&self) -> f64 {
        self.b.unwrap_or(f64::INFINITY)
    }

    /// Explicit budgets, or 21 points from the cheapest sensing cost to the
    /// zero-rate distortion.
    fn grid(&self, model: &SdmcModel<f64>) -> Vec<f64> {
        let mut g = match (&self.d0, &self.d0_grid) {
            (Some(list), _) => list.clone(),
            (None, Some(spec)) => spec.linear(),
            (None, None) => {
                let c = build_deterministic_estimator(model);
                let lo = c.sensing_costs().iter().copied().fold(f64::INFINITY, f64::min);
                let hi = zero_rate_distortion(model).max(lo);
                GridSpec { lo, hi, n: 21 }.linear()
            }
        };
        g.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        g
    }
}

#[derive(Debug, Args)]
pub struct RdCurveArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Input distribution as a list, or `optimize` for the capacity-achieving
    /// input under `--d0` / `--b`.
    #[arg(long, default_value = "uniform")]
    pub px: String,
    /// Sensing budget used with `--px optimize`.
    #[arg(long)]
    pub d0: Option<f64>,
    /// Input-cost budget used with `--px optimize`.
    #[arg(long)]
    pub b: Option<f64>,
    #[command(flatten)]
    pub mu: MuArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Companion CSV with the maximizing input of every point (defaults to
    /// `<out stem>.px.csv` when `--out` is given).
    #[arg(long, value_name = "PATH")]
    pub px_out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[command(flatten)]
    pub mu: MuArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Waveform {
    /// Constant amplitude sqrt(P).
    Det,
    /// Uniformly weighted M-ary PAM with mean power P.
    Pam,
}

#[derive(Debug, Args)]
pub struct GaussianArgs {
    #[arg(long, value_enum, default_value = "det")]
    pub waveform: Waveform,
    /// Emit both curves.
    #[arg(long)]
    pub compare: bool,
    /// Transmit power in dB (unit state and noise variance).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub power_db: f64,
    #[arg(long, default_value_t = 16)]
    pub pam_order: usize,
    /// Distortion values.
    #[arg(long, value_delimiter = ',', conflicts_with = "d_grid")]
    pub d: Option<Vec<f64>>,
    /// Linear distortion grid `lo:hi:n` (default: 100 points above the
    /// validity threshold).
    #[arg(long)]
    pub d_grid: Option<GridSpec>,
    #[arg(long, default_value = "bits")]
    pub unit: InfoUnit,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorChoice {
    /// Minimum-distortion deterministic estimator.
    Deterministic,
    /// Rate-distortion optimal kernel at slope `--mu`.
    Ba,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value = "uniform")]
    pub px: String,
    #[arg(long, value_enum, default_value = "deterministic")]
    pub estimator: EstimatorChoice,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub mu: f64,
    /// Number of samples.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Runs one command and returns the process exit code. Errors are returned
/// to the caller, which maps them through [`Error::exit_code`].
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::RdCurve(a) => cmd_rd_curve(a),
        Command::Capacity(a) => cmd_capacity(a),
        Command::Region(a) => cmd_region(a),
        Command::Gaussian(a) => cmd_gaussian(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Spec(a) => {
            let model = a.channel.load()?;
            println!("{}", model.to_json());
            Ok(0)
        }
        Command::Simulate(a) => cmd_simulate(a),
    }
}

const NOT_CONVERGED: i32 = 4;

/// Writes the CSV to `out` (or stdout) and the summary to stdout (or stderr).
fn emit(out: Option<&Path>, csv: &str, summary: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, csv)?;
            print!("{summary}");
        }
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn parse_px(text: &str, model: &SdmcModel<f64>) -> Result<InputDist<f64>> {
    let n = model.sizes().x;
    if text == "uniform" {
        return Ok(InputDist::uniform(n));
    }
    let probs = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("--px entry `{v}`: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if probs.len() != n {
        return Err(Error::validation(
            "px",
            format!("expected {n} probabilities, got {}", probs.len()),
        ));
    }
    InputDist::new(probs)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join(",")
}

fn ba_base(s: &SolverArgs) -> BaConfig<f64> {
    BaConfig {
        tol: s.tol,
        max_iter: s.max_iter,
        ..BaConfig::default()
    }
}

/// Capacity search tolerance derived from `--tol` (the inner gap is in nats
/// and needs to be tighter than the budget tolerance).
fn capacity_tol(s: &SolverArgs) -> f64 {
    (s.tol * 1e-3).max(1e-15)
}

pub fn cmd_rd_curve(a: RdCurveArgs) -> Result<i32> {
    let model = a.channel.load()?;
    let mu_grid = a.mu.grid()?;
    let px = if a.px == "optimize" {
        let cp = blahut_capacity_cost(
            &model,
            a.d0.unwrap_or(f64::INFINITY),
            a.b.unwrap_or(f64::INFINITY),
            capacity_tol(&a.solver),
            a.solver.max_iter,
        )?;
        cp.px_star
    } else {
        parse_px(&a.px, &model)?
    };
    let curve = trace_curve(&model, &px, &mu_grid, &ba_base(&a.solver))?;
    let csv = curve_csv(&curve, a.solver.unit)?;

    let unit = a.solver.unit;
    let d: Vec<f64> = curve.points.iter().map(|p| p.distortion).collect();
    let r: Vec<f64> = curve.points.iter().map(|p| unit.from_bits(p.rate_bits)).collect();
    let iters: Vec<usize> = curve.points.iter().map(|p| p.iterations).collect();
    let mut s = String::new();
    writeln!(s, "px: {}", fmt_list(px.probs())).ok();
    writeln!(s, "points: {}", curve.points.len()).ok();
    writeln!(s, "D range: [{}, {}]", fmt_sig(min(&d)), fmt_sig(max(&d))).ok();
    writeln!(s, "R range: [{}, {}] {}", fmt_sig(min(&r)), fmt_sig(max(&r)), unit.suffix()).ok();
    writeln!(
        s,
        "iterations: min {} max {} total {}",
        iters.iter().min().unwrap(),
        iters.iter().max().unwrap(),
        iters.iter().sum::<usize>()
    )
    .ok();
    writeln!(s, "converged: {}", curve.all_converged).ok();
    emit(a.solver.out.as_deref(), &csv, &s)?;
    Ok(if curve.all_converged { 0 } else { NOT_CONVERGED })
}

pub fn cmd_capacity(a: CapacityArgs) -> Result<i32> {
    let model = a.channel.load()?;
    let grid = a.budget.grid(&model);
    let points = capacity_distortion_curve(
        &model,
        &grid,
        a.budget.b(),
        capacity_tol(&a.solver),
        a.solver.max_iter,
    )?;
    let unit = a.solver.unit;
    let csv = capacity_csv(&points, unit)?;
    let px_path = a.px_out.clone().or_else(|| {
        a.solver
            .out
            .as_ref()
            .map(|p| p.with_extension("px.csv"))
    });
    if let Some(path) = &px_path {
        std::fs::write(path, input_dist_csv(&points)?)?;
    }
    let mut s = String::new();
    for p in &points {
        writeln!(
            s,
            "D0={} C={} {} px*=({})",
            fmt_sig(p.d0),
            fmt_sig(unit.from_bits(p.capacity_bits)),
            unit.suffix(),
            fmt_list(p.px_star.probs())
        )
        .ok();
    }
    let ok = points.iter().all(|p| p.converged);
    writeln!(s, "converged: {ok}").ok();
    emit(a.solver.out.as_deref(), &csv, &s)?;
    Ok(if ok { 0 } else { NOT_CONVERGED })
}

pub fn cmd_region(a: RegionArgs) -> Result<i32> {
    let model = a.channel.load()?;
    let grid = a.budget.grid(&model);
    let mu_grid = a.mu.grid()?;
    let cfg = RegionConfig {
        capacity_tol: capacity_tol(&a.solver),
        capacity_max_iter: a.solver.max_iter,
        ba: ba_base(&a.solver),
    };
    let surface = sweep_region(&model, &grid, a.budget.b(), &mu_grid, &cfg)?;
    for skip in &surface.skipped {
        eprintln!("warning: D0={} skipped: {}", fmt_sig(skip.d0), skip.reason);
    }
    let csv = export_region(&surface, a.solver.unit)?;
    let unit = a.solver.unit;
    let mut s = String::new();
    for g in &surface.groups {
        writeln!(
            s,
            "D0={} C={} {} Dmin={} points={}",
            fmt_sig(g.capacity.d0),
            fmt_sig(unit.from_bits(g.capacity.capacity_bits)),
            unit.suffix(),
            fmt_sig(g.d_min),
            g.curve.points.len()
        )
        .ok();
    }
    writeln!(s, "skipped: {}", surface.skipped.len()).ok();
    writeln!(s, "converged: {}", surface.all_converged()).ok();
    emit(a.solver.out.as_deref(), &csv, &s)?;
    Ok(if surface.all_converged() { 0 } else { NOT_CONVERGED })
}

pub fn cmd_gaussian(a: GaussianArgs) -> Result<i32> {
    let params = GaussianSensingParams::unit_with_power_db(a.power_db)?;
    let amplitude = params.power.sqrt();
    let pam = pam_constellation(a.pam_order, params.power)?;
    let want_det = a.compare || a.waveform == Waveform::Det;
    let want_pam = a.compare || a.waveform == Waveform::Pam;

    let det_floor = mmse_endpoint(amplitude, &params);
    let pam_floor = mixture_validity_threshold(&pam, &params);
    let grid = match (&a.d, &a.d_grid) {
        (Some(list), _) => list.clone(),
        (None, Some(spec)) => spec.linear(),
        (None, None) => {
            let lo = if want_pam { pam_floor } else { det_floor };
            let hi = if want_pam {
                pam.amplitudes.iter().map(|x| x * x).fold(0.0, f64::max) * params.sigma_s2
            } else {
                params.power * params.sigma_s2
            };
            (1..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect()
        }
    };

    let det = |d: f64| gaussian_det_rd(amplitude, &params, d);
    let mix = |d: f64| gaussian_mixture_rd(&pam, &params, d);
    let unit = a.unit;
    let u = unit.suffix();
    let mut header = vec!["d".to_string()];
    if want_det {
        header.push(format!("R_det_{u}"));
    }
    if want_pam {
        header.push(format!("R_pam{}_{u}", a.pam_order));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &d in &grid {
        let mut row = vec![fmt_sig(d)];
        if want_det {
            row.push(fmt_sig(unit.from_bits(det(d))));
        }
        if want_pam {
            row.push(fmt_sig(unit.from_bits(mix(d)?)));
        }
        rows.push(row);
    }
    let csv = write_csv(&header, rows)?;

    let mut s = String::new();
    writeln!(s, "power: {} dB (P = {})", fmt_sig(a.power_db), fmt_sig(params.power)).ok();
    if want_det {
        writeln!(s, "deterministic MMSE endpoint: {}", fmt_sig(det_floor)).ok();
    }
    if want_pam {
        writeln!(s, "{}-PAM validity threshold: {}", a.pam_order, fmt_sig(pam_floor)).ok();
    }
    if a.compare {
        let diff = |d: f64| mix(d).map_or(f64::NAN, |m| m - det(d));
        let crossings = sign_changes(&grid, diff);
        if crossings.is_empty() {
            writeln!(s, "crossings: none on the grid").ok();
        }
        for d in crossings {
            writeln!(s, "crossing: d = {}", fmt_sig(d)).ok();
        }
    }
    emit(a.out.as_deref(), &csv, &s)?;
    Ok(0)
}

/// Points where `f` changes sign between neighbouring grid values, refined
/// by bisection.
fn sign_changes(grid: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    grid.windows(2)
        .filter_map(|w| {
            let (a, b) = (f(w[0]), f(w[1]));
            if a.is_finite() && b.is_finite() && a * b < 0.0 {
                bisect_sign_change(&f, w[0], w[1], 1e-12)
            } else {
                None
            }
        })
        .collect()
}

pub fn cmd_validate(a: ValidateArgs) -> Result<i32> {
    let model = a.channel.load()?;
    let sizes = model.sizes();
    let est = build_deterministic_estimator(&model);
    let d_uniform = minimum_distortion(&model, &InputDist::uniform(sizes.x))?;
    println!(
        "alphabets: x={} s={} t={} y={} z={}",
        sizes.x, sizes.s, sizes.t, sizes.y, sizes.z
    );
    println!("largest distortion: {}", fmt_sig(model.d_max()));
    println!("zero-rate distortion: {}", fmt_sig(zero_rate_distortion(&model)));
    println!("sensing costs: {}", fmt_list(est.sensing_costs()));
    println!("minimum distortion (uniform px): {}", fmt_sig(d_uniform));
    println!("fingerprint: {:016x}", model.fingerprint());
    Ok(0)
}

pub fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let model = a.channel.load()?;
    let px = parse_px(&a.px, &model)?;
    let kernel = match a.estimator {
        EstimatorChoice::Deterministic => build_deterministic_estimator(&model).kernel(),
        EstimatorChoice::Ba => solve_fixed_mu(&model, &px, &BaConfig::with_mu(a.mu))?.kernel,
    };
    let exact = expected_distortion(&model, &px, &kernel)?;
    let sim = simulate_empirical_distortion(&model, &px, &kernel, a.n, a.seed)?;
    println!("samples: {}", sim.samples);
    println!("seed: {}", a.seed);
    println!("empirical distortion: {}", fmt_sig(sim.mean));
    println!("standard error: {}", fmt_sig(sim.stderr));
    println!("expected distortion: {}", fmt_sig(exact));
    Ok(0)
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
