//! Runs every acceptance criterion and prints one PASS/FAIL line per
//! criterion followed by its measurements.
//!
//! Pass criterion numbers as arguments to run a subset, for example
//! `cargo test -p editflow-validation --test acceptance -- 1 8`.

use std::process::ExitCode;

use editflow_validation::{run, Settings, CRITERIA};

fn main() -> ExitCode {
    let picked: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let settings = Settings::default();
    let mut failed = Vec::new();
    for c in CRITERIA
        .iter()
        .filter(|c| picked.is_empty() || picked.contains(&c.id))
    {
        match run(c.id, &settings) {
            Ok(report) => {
                println!("{report}");
                if !report.passed() {
                    failed.push(c.id);
                }
            }
            Err(e) => {
                println!("FAIL criterion {}: {} (error: {e})", c.id, c.title);
                failed.push(c.id);
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
