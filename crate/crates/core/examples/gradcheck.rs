//! Finite-difference gradient check of every differentiable operation.

use hippo::cli::{gradient_suite, SUITE_TOL};

fn main() -> hippo::Result<()> {
    let entries = gradient_suite(1, 8)?;
    for e in &entries {
        println!(
            "{:<18} #{}  n={:<2} d={:<2} max rel err {:.2e}  {}",
            e.op,
            e.fixture,
            e.n,
            e.d,
            e.max_rel_err,
            if e.passed { "ok" } else { "FAIL" }
        );
    }
    let failed = entries.iter().filter(|e| !e.passed).count();
    println!("{} checks, {failed} above {SUITE_TOL:e}", entries.len());
    Ok(())
}
