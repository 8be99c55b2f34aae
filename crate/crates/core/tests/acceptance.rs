use std::io::Write;

use hmcf::suite::{run_suite, SuiteConfig};

#[test]
fn acceptance() {
    let summary = run_suite(&SuiteConfig::default()).unwrap();
    // written to the stderr handle directly so the lines survive output capture
    let mut err = std::io::stderr().lock();
    for line in summary.lines() {
        writeln!(err, "{line}").unwrap();
    }
    for c in summary.criteria.iter().filter(|c| !c.pass) {
        for r in c.reports.iter().filter(|r| !r.pass) {
            writeln!(err, "  {} {}: lhs {:.9e} rhs {:.9e} slack {:.3e} tol {:.3e} {:?}", c.id, r.name, r.lhs, r.rhs, r.slack, r.tolerance, r.metadata)
                .unwrap();
        }
    }
    assert_eq!(summary.criteria.len(), 11);
    assert!(summary.pass, "acceptance criteria failed");
}
