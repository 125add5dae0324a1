mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdmc_rd::analytic::{
    build_binary_multiplicative_channel, corollary1_rate, gaussian_det_rd, gaussian_mixture_rd,
    mixture_validity_threshold, pam_constellation, GaussianSensingParams,
};
use sdmc_rd::capacity::{blahut_capacity_cost, conditional_mi_xy_given_s, min_sensing_cost_given_budget};
use sdmc_rd::estimator::{
    build_deterministic_estimator, minimum_distortion, zero_rate_distortion,
};
use sdmc_rd::model::{
    conditional_mutual_information, expected_distortion, joint_xt, posterior_s_given_xt, InputDist,
    SdmcModel,
};
use sdmc_rd::rd_ba::{
    default_mu_grid, p_update, q_update, solve_fixed_mu, trace_curve, BaConfig, EstimatorKernel,
};
use sdmc_rd::Error;

use common::{random_kernel, random_model, random_model_with, random_px, simplex};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn mutual_information_nonnegative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let px = random_px(&mut r, m.sizes().x);
        let joint = joint_xt(&m, &px).unwrap();
        for _ in 0..20 {
            let k = random_kernel(&mut r, &m);
            prop_assert!(conditional_mutual_information(&joint, &k).unwrap() >= 0.0);
        }
        // a kernel that ignores t carries no information
        let a = m.sizes();
        let rows: Vec<Vec<f64>> = (0..a.x).map(|_| simplex(&mut r, a.z)).collect();
        let flat = EstimatorKernel::from_fn(a.x, a.t, a.z, |x, _, z| rows[x][z]).unwrap();
        prop_assert!(conditional_mutual_information(&joint, &flat).unwrap() < 1e-15);
    }

    #[test]
    fn posterior_matches_bayes_rule(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let post = posterior_s_given_xt(&m);
        let a = m.sizes();
        for x in 0..a.x {
            for t in 0..a.t {
                let Some(row) = post.get(x, t) else { continue };
                for s in 0..a.s {
                    let lhs = row[s] * m.t_given_x(x, t);
                    let rhs = m.state_prior()[s] * m.sensing(x, s, t);
                    prop_assert!((lhs - rhs).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn solver_is_pure(seed in any::<u64>(), mu in -20.0f64..-0.05) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let px = random_px(&mut r, m.sizes().x);
        let cfg = BaConfig::with_mu(mu);
        let a = solve_fixed_mu(&m, &px, &cfg).unwrap();
        let b = solve_fixed_mu(&m, &px, &cfg).unwrap();
        prop_assert_eq!(a.point.distortion.to_bits(), b.point.distortion.to_bits());
        prop_assert_eq!(a.point.rate_bits.to_bits(), b.point.rate_bits.to_bits());
        prop_assert_eq!(a.kernel, b.kernel);
    }

    #[test]
    fn minimum_distortion_is_a_lower_bound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let px = random_px(&mut r, m.sizes().x);
        let d_min = minimum_distortion(&m, &px).unwrap();
        for _ in 0..100 {
            let k = random_kernel(&mut r, &m);
            prop_assert!(d_min <= expected_distortion(&m, &px, &k).unwrap() + 1e-14);
        }
        prop_assert!(zero_rate_distortion(&m) >= d_min - 1e-14);
    }

    #[test]
    fn half_steps_never_increase_objective(seed in any::<u64>(), mu in -30.0f64..-0.01) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let px = random_px(&mut r, m.sizes().x);
        let cfg = BaConfig { record_trace: true, ..BaConfig::with_mu(mu) };
        let sol = solve_fixed_mu(&m, &px, &cfg).unwrap();
        let trace = sol.trace.unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn converged_solution_is_a_fixed_point(seed in any::<u64>(), mu in -10.0f64..-0.1) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let px = random_px(&mut r, m.sizes().x);
        let sol = solve_fixed_mu(&m, &px, &BaConfig::with_mu(mu)).unwrap();
        // near the critical slope the iteration can stall and says so
        prop_assume!(sol.point.converged);
        let a = m.sizes();
        let q2 = q_update(&sol.kernel, &m).unwrap();
        for x in (0..a.x).filter(|&x| px.probs()[x] > 0.0) {
            for z in 0..a.z {
                prop_assert!((q2.get(x, z) - sol.marginal.get(x, z)).abs() <= 1e-9);
            }
        }
        let p2 = p_update(&sol.marginal, &m, mu).unwrap();
        for x in 0..a.x {
            for t in (0..a.t).filter(|&t| m.is_defined(x, t)) {
                let tv: f64 = (0..a.z).map(|z| (p2.get(x, t, z) - sol.kernel.get(x, t, z)).abs()).sum();
                prop_assert!(tv <= 1e-8, "tv {}", tv);
            }
        }
    }

    #[test]
    fn swept_curve_is_convex(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_model(&mut r);
        let px = random_px(&mut r, m.sizes().x);
        let mut curve = trace_curve(&m, &px, &default_mu_grid(), &BaConfig::default()).unwrap();
        // stalled points are flagged and make no claim about the curve
        curve.points.retain(|p| p.converged);
        prop_assert!(curve.hull_gap() <= 1e-6, "gap {}", curve.hull_gap());
        prop_assert!(curve.rate_nonincreasing(1e-6));
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn exhaustive_search_agrees(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, s, t, z) = (r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(2..=3));
        let m = random_model_with(&mut r, x, s, t, z);
        let px = random_px(&mut r, x);
        let cells = (x * t) as u32;
        let best = (0..z.pow(cells))
            .map(|code| {
                let k = EstimatorKernel::deterministic(x, t, z, |i, j| (code / z.pow((i * t + j) as u32)) % z);
                expected_distortion(&m, &px, &k).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!((minimum_distortion(&m, &px).unwrap() - best).abs() <= 1e-14);
        let e = build_deterministic_estimator(&m);
        prop_assert!((expected_distortion(&m, &px, &e.kernel()).unwrap() - best).abs() <= 1e-14);
    }

    #[test]
    fn capacity_point_is_feasible_and_optimal(seed in any::<u64>(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let mut r = rng(seed);
        let base = random_model(&mut r);
        let mut spec = base.to_spec();
        spec.input_cost = Some((0..spec.alphabets.x).map(|_| r.gen::<f64>()).collect());
        let m = SdmcModel::new(spec).unwrap();
        let c = build_deterministic_estimator(&m).sensing_costs().to_vec();
        let b = m.input_costs().to_vec();
        let span = |v: &[f64]| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let (c_lo, c_hi) = span(&c);
        let (b_lo, b_hi) = span(&b);
        let d0 = c_lo + u * (c_hi - c_lo);
        let budget = b_lo + v * (b_hi - b_lo);
        // sensing costs of distinct inputs can tie up to rounding
        let feasible = min_sensing_cost_given_budget(&c, &b, budget).is_some_and(|v| v <= d0 + 1e-12);
        let cp = match blahut_capacity_cost(&m, d0, budget, 1e-13, 100_000) {
            Err(Error::Infeasible(_)) => {
                prop_assert!(!feasible);
                return Ok(());
            }
            other => other.unwrap(),
        };
        prop_assert!(feasible);
        prop_assert!(cp.capacity_bits >= 0.0);
        prop_assert!(cp.sensing_cost_attained <= d0 + 1e-7);
        prop_assert!(cp.input_cost_attained <= budget + 1e-7);
        let mi = conditional_mi_xy_given_s(&m, &cp.px_star).unwrap();
        prop_assert!((mi - cp.capacity_bits).abs() <= 1e-9);

        let mut best = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let px = random_px(&mut r, c.len());
            let ec: f64 = px.probs().iter().zip(&c).map(|(p, c)| p * c).sum();
            let eb: f64 = px.probs().iter().zip(&b).map(|(p, b)| p * b).sum();
            if ec <= d0 && eb <= budget {
                best = best.max(conditional_mi_xy_given_s(&m, &px).unwrap());
            }
        }
        prop_assert!(cp.capacity_bits >= best - 1e-9, "{} < {}", cp.capacity_bits, best);

        // relaxing the sensing budget never lowers capacity
        let looser = blahut_capacity_cost(&m, d0 + 0.5 * (c_hi - d0), budget, 1e-13, 100_000).unwrap();
        prop_assert!(looser.capacity_bits >= cp.capacity_bits - 1e-9);
    }
}

#[test]
fn binary_curves_match_closed_form_on_the_whole_family() {
    for pi in 1..=5 {
        for qi in 1..=5 {
            let (p, q) = (0.1 * pi as f64, 0.1 * qi as f64);
            let m = build_binary_multiplicative_channel(q).unwrap();
            let px = InputDist::new(vec![p, 1.0 - p]).unwrap();
            let curve = trace_curve(&m, &px, &default_mu_grid(), &BaConfig::default()).unwrap();
            let top = q.min(1.0 - q);
            for pt in &curve.points {
                let r = if pt.distortion >= top {
                    0.0
                } else {
                    corollary1_rate(p, q, pt.distortion).unwrap()
                };
                assert!((pt.rate_bits - r).abs() <= 1e-4, "p={p} q={q} {pt:?}");
            }
        }
    }
}

#[test]
fn gaussian_curves_are_monotone() {
    for db in [0.0f64, 10.0] {
        let params = GaussianSensingParams::unit_with_power_db(db).unwrap();
        let pam = pam_constellation(16, params.power).unwrap();
        let lo = mixture_validity_threshold(&pam, &params);
        let mut prev_mix = f64::INFINITY;
        let mut prev_det = f64::INFINITY;
        for i in 1..=400 {
            let d = lo + 30.0 * i as f64 / 400.0;
            let mix = gaussian_mixture_rd(&pam, &params, d).unwrap();
            let det = gaussian_det_rd(params.power.sqrt(), &params, d);
            assert!(mix >= 0.0 && mix <= prev_mix + 1e-12);
            assert!(det >= 0.0 && det <= prev_det + 1e-12);
            prev_mix = mix;
            prev_det = det;
        }
    }
}
