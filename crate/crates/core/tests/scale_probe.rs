//! Manual timing probes for the big solves (run with
//! `cargo test --release -p jomatch --test scale_probe -- --ignored --nocapture`).

use jomatch::driver::{solve_basic, solve_basic_with, PipelineOptions};
use jomatch::relaxation::ModelForm;
use jomatch::synth::{generate, CorruptionParams};

fn probe(n: usize, d: usize, p_true: f64, seed: u64, crash: bool) {
    let inst = generate(&CorruptionParams {
        n,
        d,
        p_true,
        p_obs: 1.0,
        seed,
    })
    .unwrap();
    let started = std::time::Instant::now();
    let opts = PipelineOptions {
        crash_start: crash,
        ..Default::default()
    };
    let report = solve_basic_with(&inst, ModelForm::PermSync, &opts).unwrap();
    println!(
        "n={n} d={d} p={p_true} crash={crash}: status {:?} obj {:.1} binary {} recovered {:?} iters {} lazy_rows {} rounds {} in {:?}",
        report.status,
        report.objective,
        report.is_binary,
        report.recovered,
        report.lp_iterations,
        report.lazy_triangle_rows,
        report.rounds,
        started.elapsed()
    );
}

#[test]
#[ignore]
fn probe_n20() {
    probe(20, 3, 0.9, 1, true);
    probe(20, 3, 0.5, 1, true);
    probe(20, 3, 0.1, 1, true);
}

#[test]
#[ignore]
fn probe_n50() {
    probe(50, 3, 0.7, 1, true);
}

#[test]
#[ignore]
fn probe_n100() {
    probe(100, 2, 0.7, 1, true);
    probe(100, 3, 0.9, 1, true);
    probe(100, 3, 0.7, 1, true);
}

#[test]
#[ignore]
fn probe_nocrash_n20() {
    probe(20, 3, 0.5, 1, false);
}

#[test]
#[ignore]
fn probe_double_n10_d5() {
    let inst = generate(&CorruptionParams {
        n: 10,
        d: 5,
        p_true: 0.5,
        p_obs: 0.5,
        seed: 2,
    })
    .unwrap();
    let started = std::time::Instant::now();
    let report = jomatch::driver::double_lp(
        &inst,
        ModelForm::PermSync,
        1000,
        jomatch::cuts::ScanStrategy::FirstK,
    )
    .unwrap();
    println!(
        "double n=10 d=5: status {:?} binary {} cuts {} in {:?}",
        report.status,
        report.is_binary,
        report.cuts_added,
        started.elapsed()
    );
    let basic = solve_basic(&inst, ModelForm::PermSync).unwrap();
    println!("basic binary {} obj {}", basic.is_binary, basic.objective);
}
