use geomonge::disintegration::split_plan;
use geomonge::flow::solve_transport_equation;
use geomonge::kantorovich::{certify_monotone, plan_cost, solve_kantorovich, vertex_couplings};
use geomonge::mcp::{s_k, McpParams};
use geomonge::measure::difference;
use geomonge::monge::{assemble_monge_map, monotone_rearrangement_1d, verify_cost_identity};
use geomonge::par;
use geomonge::rays::{close_cycles, rays_from_plan};
use geomonge::rng::CounterRng;
use geomonge::scenario::random_tree_instance;
use geomonge::space::build_segment;
use geomonge::DiscreteMeasure;
use proptest::prelude::*;

/// Two measures of equal total on `n` points from small integer weights.
fn measures(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(0u32..4, n), prop::collection::vec(0u32..4, n)).prop_filter_map("both nonzero", |(a, b)| {
        let (sa, sb): (u32, u32) = (a.iter().sum(), b.iter().sum());
        if sa == 0 || sb == 0 {
            return None;
        }
        // Scale to the common total sa·sb so the masses stay integers.
        Some((a.iter().map(|&x| (x * sb) as f64).collect(), b.iter().map(|&x| (x * sa) as f64).collect()))
    })
}

/// `∫ |F − G|` on a line: the 1D transport cost, computed from CDFs only.
fn cdf_cost(params: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (mut fa, mut fb, mut out) = (0.0, 0.0, 0.0);
    for k in 0..params.len() - 1 {
        fa += a[k];
        fb += b[k];
        out += (fa - fb).abs() * (params[k + 1] - params[k]);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rearrangement_matches_cdf_cost((a, b) in measures(7)) {
        let params: Vec<f64> = (0..7).map(|i| i as f64 * 0.5).collect();
        let r = monotone_rearrangement_1d((&params, &a), (&params, &b)).unwrap();
        let expected = cdf_cost(&params, &a, &b);
        prop_assert!((r.cost - expected).abs() <= 1e-9 * expected.max(1.0));
        let mut left = vec![0.0; 7];
        let mut right = vec![0.0; 7];
        for &(i, j, m) in &r.entries {
            left[i] += m;
            right[j] += m;
        }
        for k in 0..7 {
            prop_assert!((left[k] - a[k]).abs() < 1e-9 && (right[k] - b[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn segment_oracle_is_the_cdf_cost((a, b) in measures(6)) {
        let s = build_segment(6, 5.0).unwrap();
        let (mu, nu) = (DiscreteMeasure::new(a.clone()).unwrap(), DiscreteMeasure::new(b.clone()).unwrap());
        let plan = solve_kantorovich(&s, &mu, &nu).unwrap();
        let params: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let expected = cdf_cost(&params, &a, &b);
        prop_assert!((plan_cost(&s, plan.entries()) - expected).abs() <= 1e-9 * expected.max(1.0));
        prop_assert!(plan.marginal_defect(&mu, &nu) < 1e-9);
        let cert = certify_monotone(&s, &plan, 4).unwrap();
        prop_assert!(cert.passed());
    }

    #[test]
    fn oracle_beats_every_vertex((a, b) in measures(4)) {
        let s = build_segment(4, 3.0).unwrap();
        let (mu, nu) = (DiscreteMeasure::new(a).unwrap(), DiscreteMeasure::new(b).unwrap());
        let best = plan_cost(&s, solve_kantorovich(&s, &mu, &nu).unwrap().entries());
        for v in vertex_couplings(&mu, &nu, 1 << 14).unwrap() {
            prop_assert!(best <= plan_cost(&s, v.entries()) + 1e-9);
        }
    }

    #[test]
    fn segment_pipeline_identities((a, b) in measures(8)) {
        let s = build_segment(8, 1.0).unwrap();
        let (mu, nu) = (DiscreteMeasure::new(a).unwrap(), DiscreteMeasure::new(b).unwrap());
        let plan = solve_kantorovich(&s, &mu, &nu).unwrap();
        let rc = rays_from_plan(&s, &plan).unwrap();
        prop_assert_eq!(close_cycles(&s, &rc.gamma_prime).unwrap(), rc.gamma_prime.clone());
        let rs = &rc.system;
        let map = assemble_monge_map(&s, rs, &mu, &nu, &plan).unwrap();
        let oracle = plan_cost(&s, plan.entries());
        prop_assert!((map.cost - oracle).abs() <= 1e-9 * oracle.max(1.0));
        let ci = verify_cost_identity(&s, rs, &map.plan, &mu, &nu).unwrap();
        prop_assert!(ci.defect <= 1e-9 * oracle.max(1.0));
        let (mf, nf) = split_plan(rs, &map.plan).unwrap().families(rs);
        let sol = solve_transport_equation(rs, &mf, &nf).unwrap();
        let target = difference(&mu, &nu);
        for (x, y) in sol.current.boundary().measure.iter().zip(&target) {
            prop_assert!((x - y).abs() <= 1e-12 * oracle.max(1.0));
        }
    }

    #[test]
    fn permuting_points_keeps_the_cost(seed in 0u64..1000) {
        let inst = random_tree_instance(seed, 0).unwrap();
        let n = inst.space.n();
        let mut rng = CounterRng::new(seed, 7);
        let mut shuffled: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.range(0, i + 1);
            shuffled.swap(i, j);
        }
        let space = inst.space.permuted(&shuffled).unwrap();
        let (mu, nu) = (inst.mu.permuted(&shuffled), inst.nu.permuted(&shuffled));
        let a = plan_cost(&inst.space, solve_kantorovich(&inst.space, &inst.mu, &inst.nu).unwrap().entries());
        let b = plan_cost(&space, solve_kantorovich(&space, &mu, &nu).unwrap().entries());
        prop_assert!((a - b).abs() <= 1e-9);
        let back = space.permuted(&inverse(&shuffled)).unwrap();
        prop_assert_eq!(back.dl(0, n - 1), inst.space.dl(0, n - 1));
    }

    #[test]
    fn s_k_is_continuous_in_k(t in 0.0f64..10.0) {
        // |s_K(t) − t| = |K| t³/6 + O(K² t⁵): within 1e-5 only while
        // t³ ≤ 6e-5/|K|, i.e. t ≤ 3.9 at |K| = 1e-6.
        for k in [1e-6, -1e-6] {
            let v = s_k(McpParams::new(k, 2.0).unwrap(), t).unwrap();
            let taylor = k.abs() * t.powi(3) / 6.0;
            prop_assert!((v - t).abs() <= taylor * 1.01 + 1e-12);
            if t <= 3.9 {
                prop_assert!((v - t).abs() <= 1e-5);
            }
        }
    }
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

#[test]
fn s_k_starts_with_unit_slope() {
    let h = 1e-7;
    for k in [-1.0, 0.0, 1.0] {
        let p = McpParams::new(k, 3.0).unwrap();
        assert_eq!(s_k(p, 0.0).unwrap(), 0.0);
        assert!((s_k(p, h).unwrap() / h - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let run = || {
        (0..20)
            .map(|i| {
                let inst = random_tree_instance(99, i).unwrap();
                let plan = solve_kantorovich(&inst.space, &inst.mu, &inst.nu).unwrap();
                let cert = certify_monotone(&inst.space, &plan, 4).unwrap();
                (plan, cert)
            })
            .collect::<Vec<_>>()
    };
    par::set_parallel(false);
    let seq = run();
    par::set_parallel(true);
    let par_ = run();
    assert_eq!(seq, par_);
}

#[test]
fn counter_rng_is_reproducible() {
    let draw = |seed| {
        let mut r = CounterRng::new(seed, 3);
        (0..8).map(|_| r.next_u64()).collect::<Vec<_>>()
    };
    assert_eq!(draw(5), draw(5));
    assert_ne!(draw(5), draw(6));
}
