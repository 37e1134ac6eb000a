//! The ten acceptance criteria at their stated tolerances, one test each,
//! driven by the same suites as the command-line tool with the default
//! configuration. Every test prints a single PASS/FAIL line (uncaptured).

use std::io::Write;
use std::sync::OnceLock;

use kgflow::experiments::{RunConfig, Suite, SuiteOutput};

fn suite(which: Suite) -> &'static Result<SuiteOutput, String> {
    static CACHE: [OnceLock<Result<SuiteOutput, String>>; 5] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = Suite::ALL.iter().position(|s| *s == which).expect("registered suite");
    CACHE[slot].get_or_init(|| which.run(&RunConfig::default()).map_err(|e| e.to_string()))
}

fn criterion(which: Suite, id: u32) {
    let line = match suite(which) {
        Ok(out) => match out.check(id) {
            Some(check) => check.line(),
            None => format!("C{id} FAIL: not evaluated"),
        },
        Err(e) => format!("C{id} FAIL: {which:?} suite error: {e}"),
    };
    // Bypasses the harness's output capture so the line always shows.
    #[allow(clippy::explicit_write)]
    writeln!(std::io::stderr(), "{line}").unwrap();
    assert!(line.starts_with(&format!("C{id} PASS")), "{line}");
}

#[test]
fn c01_plancherel_isometry() {
    criterion(Suite::Transform, 1);
}

#[test]
fn c02_round_trip() {
    criterion(Suite::Transform, 2);
}

#[test]
fn c03_decay_rate() {
    criterion(Suite::Decay, 3);
}

#[test]
fn c04_remainder_order() {
    criterion(Suite::Coefficient, 4);
}

#[test]
fn c05_coefficient_sandwich() {
    criterion(Suite::Coefficient, 5);
}

#[test]
fn c06_branch_energy_scaling() {
    criterion(Suite::Energy, 6);
}

#[test]
fn c07_cone_energy_bounds() {
    criterion(Suite::Energy, 7);
}

#[test]
fn c08_ratio_boundedness() {
    criterion(Suite::Energy, 8);
}

#[test]
fn c09_fdtd_cross_validation() {
    criterion(Suite::Oracle, 9);
}

#[test]
fn c10_stationary_point_and_cone_identities() {
    criterion(Suite::Coefficient, 10);
}
