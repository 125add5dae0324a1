//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdmc_rd::analytic::{
    binary_capacity_distortion, bisect_sign_change, build_binary_multiplicative_channel,
    build_product_dmc, corollary1_rate, gaussian_det_rd, gaussian_mixture_rd,
    mixture_validity_threshold, mmse_endpoint, pam_constellation, GaussianSensingParams,
};
use sdmc_rd::capacity::{blahut_capacity_cost, conditional_mi_xy_given_s};
use sdmc_rd::estimator::{build_deterministic_estimator, minimum_distortion, simulate_empirical_distortion};
use sdmc_rd::model::{conditional_mutual_information, expected_distortion, joint_xt, InputDist, SdmcModel};
use sdmc_rd::rd_ba::{default_mu_grid, rate_at_distortion, solve_fixed_mu, trace_curve, BaConfig, EstimatorKernel};
use sdmc_rd::Error;

use common::{random_deterministic_kernel, random_kernel, random_model, random_model_with, random_px};

const RANDOM_MODELS: usize = 200;
const MODEL_SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// The random (model, px) pairs shared by criteria 2 and 3.
fn random_pairs() -> Vec<(SdmcModel<f64>, InputDist<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(MODEL_SEED);
    (0..RANDOM_MODELS)
        .map(|_| {
            let m = random_model(&mut rng);
            let px = random_px(&mut rng, m.sizes().x);
            (m, px)
        })
        .collect()
}

fn binary_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for p in [0.3f64, 0.5] {
        for q in [0.3, 0.5] {
            let m = build_binary_multiplicative_channel(q).unwrap();
            let px = InputDist::new(vec![p, 1.0 - p]).unwrap();
            let start = Instant::now();
            let curve = trace_curve(&m, &px, &default_mu_grid(), &BaConfig::default()).unwrap();
            slowest = slowest.max(start.elapsed().as_secs_f64());
            for pt in &curve.points {
                // R(D) = 0 from the zero-rate distortion min{q, 1-q} onwards
                let r = if pt.distortion >= q.min(1.0 - q) {
                    0.0
                } else {
                    corollary1_rate(p, q, pt.distortion).unwrap()
                };
                worst = worst.max((pt.rate_bits - r).abs());
            }
        }
    }
    outcome(
        worst <= 1e-4 && slowest < 10.0,
        format!("sup gap {worst:.3e} bits (<= 1e-4), slowest curve {slowest:.3} s (< 10 s)"),
    )
}

fn monotone_objective(pairs: &[(SdmcModel<f64>, InputDist<f64>)]) -> Outcome {
    let mut runs = 0;
    let mut bad = 0;
    let mut worst = f64::NEG_INFINITY;
    for (m, px) in pairs {
        for mu in [-0.1, -1.0, -10.0] {
            let cfg = BaConfig {
                record_trace: true,
                ..BaConfig::with_mu(mu)
            };
            let sol = solve_fixed_mu(m, px, &cfg).unwrap();
            let trace = sol.trace.unwrap();
            let rise = trace
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(rise);
            runs += 1;
            if rise > 1e-12 {
                bad += 1;
            }
        }
    }
    outcome(
        bad == 0,
        format!("{runs} runs, {bad} with a half-step increase > 1e-12, largest step {worst:.3e}"),
    )
}

fn endpoint(pairs: &[(SdmcModel<f64>, InputDist<f64>)]) -> Outcome {
    let mut far = 0;
    let mut worst: f64 = 0.0;
    let mut flagged = 0;
    let mut far_converged = 0;
    for (m, px) in pairs {
        let d_min = minimum_distortion(m, px).unwrap();
        let sol = solve_fixed_mu(m, px, &BaConfig::with_mu(-50.0)).unwrap();
        let gap = sol.point.distortion - d_min;
        worst = worst.max(gap);
        if gap.abs() > 1e-3 {
            far += 1;
            if sol.point.converged {
                far_converged += 1;
            }
        }
        if matches!(rate_at_distortion(m, px, d_min - 1e-3, 1e-6), Err(Error::Infeasible(_))) {
            flagged += 1;
        }
    }
    outcome(
        far == 0 && flagged == pairs.len(),
        format!(
            "{far}/{} models with |D(mu=-50) - Dmin| > 1e-3 ({far_converged} of them converged, \
             largest gap {worst:.3e}); \
             {flagged}/{} sub-minimum targets flagged infeasible",
            pairs.len(),
            pairs.len()
        ),
    )
}

/// Not a criterion: the same models at a much steeper slope, showing that the
/// residual gap at -50 is the finite-slope bias and not a solver defect.
fn endpoint_at_steeper_slopes(pairs: &[(SdmcModel<f64>, InputDist<f64>)]) -> String {
    let mut parts = Vec::new();
    for mu in [-50.0, -500.0, -5000.0] {
        let mut far = 0;
        let mut worst: f64 = 0.0;
        for (m, px) in pairs {
            let d_min = minimum_distortion(m, px).unwrap();
            let sol = solve_fixed_mu(m, px, &BaConfig::with_mu(mu)).unwrap();
            let gap = sol.point.distortion - d_min;
            worst = worst.max(gap);
            if gap.abs() > 1e-3 {
                far += 1;
            }
        }
        parts.push(format!("mu={mu}: {far} over 1e-3, max gap {worst:.2e}"));
    }
    parts.join("; ")
}

/// Expected distortion of every deterministic map, minimized exhaustively.
fn brute_force_min(m: &SdmcModel<f64>, px: &InputDist<f64>) -> f64 {
    let a = m.sizes();
    let cells = a.x * a.t;
    (0..a.z.pow(cells as u32))
        .map(|code| {
            let k = EstimatorKernel::deterministic(a.x, a.t, a.z, |x, t| {
                (code / a.z.pow((x * a.t + t) as u32)) % a.z
            });
            expected_distortion(m, px, &k).unwrap()
        })
        .fold(f64::INFINITY, f64::min)
}

fn estimator_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MODEL_SEED + 4);
    let mut worst_dmin: f64 = 0.0;
    let mut models = 0;
    for i in 0..100 {
        let s = 2 + i % 2;
        let m = random_model_with(&mut rng, 2, s, 2, 2);
        let px = random_px(&mut rng, 2);
        worst_dmin = worst_dmin.max((minimum_distortion(&m, &px).unwrap() - brute_force_min(&m, &px)).abs());
        models += 1;
    }

    let mut worst_lagrangian = f64::NEG_INFINITY;
    let mut cases = 0;
    for i in 0..10 {
        let m = random_model_with(&mut rng, 2, 2 + i % 2, 2, 2);
        let px = random_px(&mut rng, 2);
        let joint = joint_xt(&m, &px).unwrap();
        for mu in [-0.5, -2.0, -10.0] {
            let ba = solve_fixed_mu(&m, &px, &BaConfig::with_mu(mu)).unwrap();
            let best_random = (0..10_000)
                .map(|j| {
                    let k = if j % 10 == 0 {
                        random_deterministic_kernel(&mut rng, &m)
                    } else {
                        random_kernel(&mut rng, &m)
                    };
                    conditional_mutual_information(&joint, &k).unwrap()
                        - mu * expected_distortion(&m, &px, &k).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            worst_lagrangian = worst_lagrangian.max(ba.point.objective_nats - best_random);
            cases += 1;
        }
    }
    outcome(
        worst_dmin <= 1e-14 && worst_lagrangian <= 1e-9,
        format!(
            "{models} models: max |Dmin - exhaustive| {worst_dmin:.1e} (summation-order rounding only); \
             {cases} cases: max (F_BA - best of 1e4 random kernels) {worst_lagrangian:.3e} nats"
        ),
    )
}

fn capacity_closed_form() -> Outcome {
    let mut worst_binary: f64 = 0.0;
    for q in [0.5f64, 0.3] {
        let m = build_binary_multiplicative_channel(q).unwrap();
        let top = q.min(1.0 - q);
        for i in 0..20 {
            let d0 = top * 1.2 * i as f64 / 19.0;
            let cp = blahut_capacity_cost(&m, d0, f64::INFINITY, 1e-13, 100_000).unwrap();
            let exact = binary_capacity_distortion(q, d0).unwrap();
            worst_binary = worst_binary.max((cp.capacity_bits - exact).abs());
        }
    }

    // 3-simplex at resolution 1e-2
    let mut worst_grid: f64 = 0.0;
    let mut grid_above = 0;
    let mut off_lattice: f64 = 0.0;
    for prior in [[0.25; 4], [1.0 / 3.0, 0.25, 0.25, 1.0 / 6.0]] {
        let m = build_product_dmc(&prior).unwrap();
        let c = build_deterministic_estimator(&m).sensing_costs().to_vec();
        let mut table = Vec::new();
        for i in 0..=100 {
            for j in 0..=100 - i {
                for k in 0..=100 - i - j {
                    let l = 100 - i - j - k;
                    let p: Vec<f64> = [i, j, k, l].iter().map(|&v| v as f64 / 100.0).collect();
                    let cost: f64 = p.iter().zip(&c).map(|(a, b)| a * b).sum();
                    let mi = conditional_mi_xy_given_s(&m, &InputDist::new(p).unwrap()).unwrap();
                    table.push((cost, mi));
                }
            }
        }
        // only x = 0 has a sensing cost; budgets on the grid's cost lattice
        // c(0) k / 100 keep the oracle's own discretization error second order
        for k in [0, 1, 2, 3, 5, 8, 13, 20, 30, 50, 100] {
            let d0 = c[0] * k as f64 / 100.0;
            let cp = blahut_capacity_cost(&m, d0, f64::INFINITY, 1e-13, 100_000).unwrap();
            let grid_best = table
                .iter()
                .filter(|(cost, _)| *cost <= d0 + 1e-12)
                .map(|&(_, mi)| mi)
                .fold(f64::NEG_INFINITY, f64::max);
            worst_grid = worst_grid.max((cp.capacity_bits - grid_best).abs());
            if grid_best > cp.capacity_bits + 1e-9 {
                grid_above += 1;
            }
        }
        // reported only: between lattice points the grid loses the steep
        // -p log p gain of the costly input
        for i in 1..20 {
            let d0 = c[0] * i as f64 / 20.0 + 1e-3;
            let cp = blahut_capacity_cost(&m, d0, f64::INFINITY, 1e-13, 100_000).unwrap();
            let grid_best = table
                .iter()
                .filter(|(cost, _)| *cost <= d0 + 1e-12)
                .map(|&(_, mi)| mi)
                .fold(f64::NEG_INFINITY, f64::max);
            off_lattice = off_lattice.max(cp.capacity_bits - grid_best);
            if grid_best > cp.capacity_bits + 1e-9 {
                grid_above += 1;
            }
        }
    }
    outcome(
        worst_binary <= 1e-4 && worst_grid <= 2e-3 && grid_above == 0,
        format!(
            "binary max error {worst_binary:.3e} bits (<= 1e-4); product channel max |C - grid| \
             {worst_grid:.3e} bits (<= 2e-3) on lattice budgets; grid beats solver {grid_above} \
             times; off-lattice budgets: solver above grid by up to {off_lattice:.3e} bits"
        ),
    )
}

fn gaussian_figure() -> Outcome {
    let order = 16;
    // 0 dB: deterministic never above PAM on the common domain
    let p0 = GaussianSensingParams::unit_with_power_db(0.0f64).unwrap();
    let pam0 = pam_constellation(order, p0.power).unwrap();
    let amp0 = p0.power.sqrt();
    let lo0 = mixture_validity_threshold(&pam0, &p0).max(mmse_endpoint(amp0, &p0));
    let hi0 = pam0.amplitudes.iter().map(|x| x * x).fold(0.0, f64::max) * p0.sigma_s2;
    let mut det_above = 0;
    for i in 1..=100 {
        let d = lo0 + (hi0 - lo0) * i as f64 / 100.0;
        if gaussian_det_rd(amp0, &p0, d) > gaussian_mixture_rd(&pam0, &p0, d).unwrap() {
            det_above += 1;
        }
    }

    // 10 dB: PAM below deterministic up to a crossing d*
    let p10 = GaussianSensingParams::unit_with_power_db(10.0f64).unwrap();
    let pam10 = pam_constellation(order, p10.power).unwrap();
    let amp10 = p10.power.sqrt();
    let threshold = mixture_validity_threshold(&pam10, &p10);
    let hi10 = pam10.amplitudes.iter().map(|x| x * x).fold(0.0, f64::max) * p10.sigma_s2;
    let diff = |d: f64| gaussian_mixture_rd(&pam10, &p10, d).unwrap() - gaussian_det_rd(amp10, &p10, d);
    let d_star = bisect_sign_change(diff, 5.0, 8.0, 1e-12);
    let mut pam_not_below = 0;
    let mut checked = 0;
    if let Some(ds) = d_star {
        for i in 1..=100 {
            let d = threshold + (hi10 - threshold) * i as f64 / 100.0;
            if d < ds {
                checked += 1;
                if diff(d) >= 0.0 {
                    pam_not_below += 1;
                }
            }
        }
    }
    // just above the validity threshold the outermost amplitude still
    // dominates the mixture; locate where PAM first drops below
    let d_low = bisect_sign_change(diff, threshold * (1.0 + 1e-9), 2.0, 1e-12);
    let pass = det_above == 0 && d_star.is_some_and(|d| (5.0..=8.0).contains(&d)) && checked > 0 && pam_not_below == 0;
    outcome(
        pass,
        format!(
            "0 dB: deterministic above PAM at {det_above}/100 points; 10 dB: d* = {}, PAM not below \
             at {pam_not_below}/{checked} grid points under d*; PAM is above on the sliver \
             ({threshold:.7}, {}) next to the validity threshold",
            d_star.map_or("none".into(), |d| format!("{d:.4}")),
            d_low.map_or("?".into(), |d| format!("{d:.7}")),
        ),
    )
}

fn monte_carlo() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MODEL_SEED + 7);
    let mut within = 0;
    let mut worst_z: f64 = 0.0;
    for case in 0..20u64 {
        let m = random_model(&mut rng);
        let px = random_px(&mut rng, m.sizes().x);
        let k = random_kernel(&mut rng, &m);
        let exact = expected_distortion(&m, &px, &k).unwrap();
        let sim = simulate_empirical_distortion(&m, &px, &k, 1_000_000, 1000 + case).unwrap();
        let z = (sim.mean - exact).abs() / sim.stderr;
        worst_z = worst_z.max(z);
        if z <= 4.0 {
            within += 1;
        }
    }
    outcome(
        within >= 19,
        format!("{within}/20 within 4 standard errors (>= 19), largest |z| {worst_z:.2}"),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_sdmc-rd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    let file = std::fs::read(dir.join("out.csv")).unwrap_or_default();
    let _ = std::fs::remove_file(dir.join("out.csv"));
    (out.status.code().unwrap_or(-1), out.stdout, file)
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("sdmc-rd-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["rd-curve", "--builtin", "binary-mult", "--q", "0.3", "--px", "0.5,0.5", "--out", "out.csv"],
        vec!["rd-curve", "--builtin", "product-dmc", "--px", "optimize", "--d0", "0.1", "--out", "out.csv"],
        vec!["capacity", "--builtin", "product-dmc", "--state-prior", "0.25,0.25,0.25,0.25", "--out", "out.csv"],
        vec!["region", "--builtin", "binary-mult", "--q", "0.3", "--mu-grid", "-50:-0.01:20", "--out", "out.csv"],
        vec!["gaussian", "--compare", "--power-db", "10", "--pam-order", "16", "--out", "out.csv"],
        vec!["simulate", "--builtin", "binary-mult", "--n", "100000", "--seed", "9"],
        vec!["validate", "--builtin", "product-dmc"],
    ];
    let mut differing = Vec::new();
    let mut failed = Vec::new();
    for args in &runs {
        let first = run_cli(&dir, args);
        let second = run_cli(&dir, args);
        if first.0 != 0 {
            failed.push(args[0]);
        }
        if first != second {
            differing.push(args[0]);
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(
        differing.is_empty() && failed.is_empty(),
        format!(
            "{} commands run twice; differing output: {:?}; nonzero exit: {:?}",
            runs.len(),
            differing,
            failed
        ),
    )
}

fn main() {
    let pairs = random_pairs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("binary rate-distortion closed form", Box::new(binary_closed_form)),
        ("monotone objective", Box::new(|| monotone_objective(&pairs))),
        ("minimum-distortion endpoint", Box::new(|| endpoint(&pairs))),
        ("exhaustive estimator oracle", Box::new(estimator_oracle)),
        ("capacity closed form and simplex grid", Box::new(capacity_closed_form)),
        ("Gaussian waveform comparison", Box::new(gaussian_figure)),
        ("Monte-Carlo consistency", Box::new(monte_carlo)),
        ("CLI determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failures += 1;
        }
        println!(
            "{} criterion {} ({name}): {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if i == 2 {
            println!("     endpoint gap versus slope: {}", endpoint_at_steeper_slopes(&pairs));
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
