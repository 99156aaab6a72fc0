//! Runs every acceptance criterion at full size and prints one line per criterion.

use cotlab::suite::{run_criterion, SuiteConfig, CRITERIA};

fn main() {
    let cfg = SuiteConfig::default();
    let mut failed = 0;
    for &(id, name, _) in CRITERIA.iter() {
        match run_criterion(id, &cfg) {
            Ok(o) => {
                println!("{}", o.line());
                if !o.passed {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("criterion {:>2} {:<28} FAIL  error: {e}", id, name);
                failed += 1;
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
