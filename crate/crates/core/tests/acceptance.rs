//! One line per acceptance criterion, then a fault-injection check.
//!
//! Runs without the libtest harness so the report is always printed.

use std::process::ExitCode;

use cwbc_core::simkit::Scenario;
use cwbc_core::validation::{run_all, static_equilibrium, Faults};

/// Criteria that fail on this model and are expected to keep failing.
///
/// 9: with the balance null space built from the kinematic projector, the
/// amplified torque does work `k xd_c (J_x J_c#)^T f_op` through the CoM
/// velocity that no storage tank accounts for, so the total storage can rise
/// once `k_FF > 0` (feedback mode and sensor model make no difference).
const KNOWN_FAILING: &[u8] = &[9];

fn main() -> ExitCode {
    let results = run_all(Faults::default());
    for r in &results {
        println!("{}", r.line());
    }
    let failing: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let passed = results.len() - failing.len();
    println!("{passed}/{} criteria passed; failing: {failing:?}", results.len());

    let mut ok = results.len() == 12;
    let unexpected: Vec<u8> = failing.iter().copied().filter(|id| !KNOWN_FAILING.contains(id)).collect();
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        ok = false;
    }
    let fixed: Vec<u8> = KNOWN_FAILING.iter().copied().filter(|id| !failing.contains(id)).collect();
    if !fixed.is_empty() {
        println!("now passing, drop from the known list: {fixed:?}");
        ok = false;
    }

    let faulty = static_equilibrium(&Scenario::default(), Faults { negate_gravity: true });
    println!("fault injection (negated gravity compensation): {}", faulty.line());
    if faulty.passed {
        println!("fault injection was not detected");
        ok = false;
    }

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
