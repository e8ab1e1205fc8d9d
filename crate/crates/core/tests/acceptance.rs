//! The twelve acceptance criteria, one PASS/FAIL line each.

use std::time::{Duration, Instant};

use cewb::verify::{criterion, run_suite, SuiteReport, VerifyOptions, SUITES};

const CRITERIA: &[(u8, &str, u64)] = &[
    (1, "image law of the induced index action", 60),
    (2, "permutation recovery from singletons", 10),
    (3, "family equality oracle for the E_set^n reduction", 300),
    (4, "finite-set avoidance on the shift", 5),
    (5, "action trichotomy tags", 30),
    (6, "least-reduction construction invariants", 120),
    (7, "infinite-orbit construction invariants", 300),
    (8, "non-isolated construction invariants", 300),
    (9, "R_n chain residue law and shift embedding", 30),
    (10, "A_n classification and R_X enumerators", 120),
    (11, "antichain construction invariants", 180),
];

fn show(rep: &SuiteReport) -> String {
    rep.checks.iter().filter(|c| !c.passed).map(|c| format!("\n    {}: {}", c.name, c.detail)).collect()
}

fn determinism() -> (bool, String) {
    let opts = VerifyOptions::default();
    let mut diffs = Vec::new();
    for s in SUITES {
        let a = run_suite(s, &opts);
        let b = run_suite(s, &opts);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                if a.to_json() != b.to_json() || a.traces != b.traces {
                    diffs.push(s.to_string());
                }
            }
            (a, b) => diffs.push(format!("{s}: {:?} / {:?}", a.err(), b.err())),
        }
    }
    (diffs.is_empty(), diffs.join(", "))
}

fn main() {
    let opts = VerifyOptions::default();
    let mut failed = Vec::new();
    for (id, title, limit) in CRITERIA {
        let t = Instant::now();
        let rep = criterion(*id, &opts);
        let el = t.elapsed();
        let (ok, detail) = match &rep {
            Ok(r) => (r.passed && el <= Duration::from_secs(*limit), show(r)),
            Err(e) => (false, format!("\n    error: {e}")),
        };
        println!("{} criterion {id:>2}: {title} ({:.1}s, limit {limit}s){detail}", if ok { "PASS" } else { "FAIL" }, el.as_secs_f64());
        if !ok {
            failed.push(*id);
        }
    }
    let t = Instant::now();
    let (ok, detail) = determinism();
    println!(
        "{} criterion 12: byte-identical reports and traces on re-run ({:.1}s) {detail}",
        if ok { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    if !ok {
        failed.push(12);
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
