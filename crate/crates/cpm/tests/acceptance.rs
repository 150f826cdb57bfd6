//! Acceptance criteria 1-12. Prints one PASS/FAIL line per criterion, followed
//! by the measured details, and exits non-zero if any criterion fails.
//!
//! `cargo test -p cpm --test acceptance -- 3 8` runs a subset.

use std::process::ExitCode;

use cpm::validation;

fn main() -> ExitCode {
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name) in validation::CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        match validation::run(id) {
            Ok(report) => {
                println!("{report}");
                if !report.passed {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("FAIL {id:>2} {name}: error {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
