//! Runs the twelve acceptance criteria with their pinned tolerances and
//! prints one PASS/FAIL line per criterion. Wall-clock limits are included.

use slipshell::verify::{Verifier, VerifySettings, SUITES};

#[test]
fn acceptance() {
    let mut v = Verifier::new(VerifySettings {
        timings: true,
        ..VerifySettings::default()
    });
    let mut failed = Vec::new();
    for id in 1..=SUITES.len() {
        let rep = v.run(id);
        println!("{}", rep.line());
        for c in &rep.checks {
            println!(
                "       {} {}: {:e} {} {:e}",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.measured,
                c.relation.symbol(),
                c.tolerance
            );
        }
        if !rep.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
