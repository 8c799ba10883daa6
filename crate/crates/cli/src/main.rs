//! Command-line front end.
//!
//! Exit codes: 0 all checks pass, 2 solver/plumbing failure, 3 one or more
//! checks failed, 4 configuration error.

mod config;
mod pipelines;

use clap::Parser;

use config::{ExperimentConfig, Flags};

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let flags = match Flags::try_parse() {
        Ok(flags) => flags,
        Err(e) => {
            // clap renders both --help and usage errors; --help is not an error
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };

    let config = match ExperimentConfig::from_flags(&flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            eprintln!("run with --help for usage");
            return 4;
        }
    };

    let summary = match pipelines::run(&config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };

    let mut all_pass = true;
    for v in &summary.verdicts {
        println!(
            "CHECK {}: {} (measured {:.6e}, bound {:.6e})",
            v.check_name,
            if v.pass { "PASS" } else { "FAIL" },
            v.measured,
            v.bound
        );
        all_pass &= v.pass;
    }
    println!(
        "summary: {} ({} checks, {:.2}s) -> {}",
        if all_pass { "PASS" } else { "FAIL" },
        summary.verdicts.len(),
        summary.wall_time_s,
        config.output_dir.join("summary.json").display()
    );

    if all_pass {
        0
    } else {
        3
    }
}
