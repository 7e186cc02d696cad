use blab_core::extremal::{search_extremal, validate_report, CEILING_TOL};
use blab_core::{bellman_value, BellmanParams, SearchConfig, SearchReport};

fn params() -> BellmanParams {
    BellmanParams::new(2.0, 1.0, 4.0 / 3.0).unwrap()
}

fn config(depth: usize, seed: u64) -> SearchConfig {
    SearchConfig { depth, restarts: 3, max_iters: 80, seed, ..Default::default() }
}

#[test]
fn deeper_trees_never_do_worse() {
    let mut last = f64::NEG_INFINITY;
    for depth in 1..=6 {
        let (cand, _) = search_extremal(&params(), &config(depth, 1)).unwrap();
        assert!(cand.objective >= last - 1e-12, "depth {depth}: {} < {last}", cand.objective);
        last = cand.objective;
    }
    assert!(last <= bellman_value(&params()).unwrap() + CEILING_TOL);
}

#[test]
fn depth_one_reaches_the_two_atom_optimum() {
    // Two atoms of mass 1/2 with mean 1 and second moment 4/3 are
    // 1 ± 1/√3; the larger one dominates, so the energy is
    // ½ (1 + 1/√3)² + ½ · 1.
    let exact = 0.5 * (1.0 + 1.0 / 3f64.sqrt()).powi(2) + 0.5;
    let (cand, _) = search_extremal(&params(), &config(1, 0)).unwrap();
    assert!((cand.objective - exact).abs() < 1e-8, "{}", cand.objective);
}

#[test]
fn reports_round_trip_through_json() {
    let (cand, report) = search_extremal(&params(), &config(4, 7)).unwrap();
    let text = serde_json::to_string(&report).unwrap();
    let back: SearchReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    let again = validate_report(&back).unwrap();
    assert_eq!(again.objective, cand.objective);
    assert_eq!(again.phi.values(), cand.phi.values());
}

#[test]
fn same_seed_same_report() {
    let (_, a) = search_extremal(&params(), &config(4, 11)).unwrap();
    let (_, b) = search_extremal(&params(), &config(4, 11)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn traces_are_consistent() {
    let (_, report) = search_extremal(&params(), &config(3, 2)).unwrap();
    let s = bellman_value(&params()).unwrap();
    assert!(!report.trace.is_empty());
    for w in report.trace.windows(2) {
        assert!(w[1].iter > w[0].iter);
    }
    for t in &report.trace {
        assert!((t.gap - (s - t.objective)).abs() < 1e-12);
        assert!(t.level1_max_dev >= 0.0);
        assert!((0.0..=1.0).contains(&t.levelset_mass));
    }
}
