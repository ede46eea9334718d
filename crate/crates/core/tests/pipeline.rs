use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use etsim::backends::Backend;
use etsim::harness::config::parse_config;
use etsim::harness::{analyze_events, build_experiment, run_experiment, RunMode};
use etsim::stats::ks_against_density;
use etsim::Error;

fn small(extra: &str, dir: &std::path::Path) -> etsim::harness::ExperimentConfig {
    parse_config(&format!(
        "source.tau_g = 10\nfilter.tau_fp = 100\noutput.dir = {}\n{extra}",
        dir.display()
    ))
    .unwrap()
}

#[test]
fn standard_sampler_reproduces_its_density() {
    let dir = tempfile::tempdir().unwrap();
    let exp = build_experiment(&small("run.backend = standard", dir.path())).unwrap();
    let std = exp.result(Backend::Standard).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t2: Vec<f64> = std
        .sampler
        .sample(100_000, &mut rng)
        .into_iter()
        .map(|p| p.1)
        .collect();
    let ks = ks_against_density(&t2, &std.p2).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_experiment(
        &small("run.n_triggers = 20000", a.path()),
        RunMode::Simulate,
    )
    .unwrap();
    let rb = run_experiment(
        &small("run.n_triggers = 20000", b.path()),
        RunMode::Simulate,
    )
    .unwrap();
    assert_eq!(ra.files.len(), rb.files.len());
    for (fa, fb) in ra.files.iter().zip(&rb.files) {
        assert_eq!(fa.file_name(), fb.file_name());
        assert_eq!(
            std::fs::read(fa).unwrap(),
            std::fs::read(fb).unwrap(),
            "{}",
            fa.display()
        );
    }
    let rc = run_experiment(
        &small("run.n_triggers = 20000\nrun.seed = 43", b.path()),
        RunMode::Simulate,
    )
    .unwrap();
    assert_ne!(ra.events, rc.events);
}

#[test]
fn analysis_recovers_widths_and_picks_the_generating_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("run.n_triggers = 200000", dir.path());
    let run = run_experiment(&cfg, RunMode::Simulate).unwrap();
    let exp = build_experiment(&cfg).unwrap();
    for (backend, batch) in &run.events {
        let a = analyze_events(batch, &exp.results).unwrap();
        assert!(a.coincidences > 1000);
        assert_eq!(a.favored(), Some(*backend));
        assert!(a.decisive(), "{}", a.to_text());
        let own = a.tests.iter().find(|t| t.backend == *backend).unwrap();
        assert!(own.widths_within(3.0), "{}", a.to_text());
        let counted: u64 = a.histograms.iter().map(|(_, h)| h.total()).sum();
        assert_eq!(counted, 3 * a.coincidences as u64);
    }
}

#[test]
fn too_few_coincidences_is_reported_with_the_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("run.n_triggers = 2000\nrun.backend = standard", dir.path());
    let run = run_experiment(&cfg, RunMode::Simulate).unwrap();
    let (_, batch) = &run.events[0];
    let n = batch.coincidences().len();
    assert!(n < 100);
    let err = analyze_events(batch, &[]).unwrap_err();
    assert!(matches!(err, Error::InsufficientData { count, needed: 100 } if count == n));
}

#[test]
fn densities_mode_writes_no_events() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_experiment(&small("", dir.path()), RunMode::DensitiesOnly).unwrap();
    assert!(run.events.is_empty());
    assert!(run.report.samples.is_empty());
    assert!(run.report.no_signaling_l1.unwrap() < 1e-6);
    assert!(!dir.path().join("events-standard.etoa").exists());
    assert!(dir.path().join("report.txt").exists());
}
