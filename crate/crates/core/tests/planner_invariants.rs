mod support {
    pub mod invariants;
}

use std::sync::OnceLock;

use support::invariants::{self as inv, Report};

fn report() -> &'static Report {
    static REPORT: OnceLock<Report> = OnceLock::new();
    REPORT.get_or_init(|| inv::sweep(120, 24, 300))
}

fn assert_invariant(name: &str) {
    let r = report();
    assert!(r.runs_of(name) >= 120, "{name} ran {} times", r.runs_of(name));
    assert!(r.passed(name), "{}", r.summary());
}

#[test]
fn sweep_reaches_solutions_prunes_and_rejections() {
    let r = report();
    assert!(r.solved >= 60, "only {} runs solved", r.solved);
    assert!(r.prunes > 0 && r.rejections > 0, "{r:?}");
}

#[test]
fn tree_cost_consistency() {
    assert_invariant(inv::TREE_CONSISTENCY);
}

#[test]
fn rewire_matches_exhaustive_oracle() {
    assert_invariant(inv::REWIRE_MONOTONICITY);
}

#[test]
fn shortcut_dominance() {
    assert_invariant(inv::SHORTCUT_DOMINANCE);
}

#[test]
fn prune_safety() {
    assert_invariant(inv::PRUNE_SAFETY);
}

#[test]
fn rejection_soundness() {
    assert_invariant(inv::REJECTION_SOUNDNESS);
}

#[test]
fn anytime_monotonicity() {
    assert_invariant(inv::ANYTIME_MONOTONICITY);
}

#[test]
fn solution_validity() {
    assert_invariant(inv::SOLUTION_VALIDITY);
}

#[test]
fn determinism() {
    assert_invariant(inv::DETERMINISM);
}

