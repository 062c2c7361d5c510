use std::path::Path;

use super::*;
use crate::diagnostics::ConvergenceKind;
use crate::error::Error;
use crate::spectral::snapshot::Snapshot;

fn small(t_final: f64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.domain.n = 16;
    cfg.stepper.dt = 1e-3;
    cfg.stepper.t_final = t_final;
    cfg.observers.cadence = 2;
    cfg.observers.plots = false;
    cfg.noise.k1 = 4;
    cfg.noise.k2 = 3;
    cfg
}

fn bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = small(0.05);
    cfg.initial = InitialSpec::RandomBand {
        seed: 3,
        k_min: 1.0,
        k_max: 3.0,
        peak: 0.7,
        speed: 0.2,
    };
    cfg.dependence = Some(DependenceSection {
        level: 10.0,
        epsilons: vec![1e-3, 1e-4],
        perturbation: Some(PerturbationSpec {
            seed: 1,
            velocity: 1.0,
            phase: 0.5,
            k_max: 3.0,
        }),
    });
    cfg.convergence = Some(ConvergenceSection {
        kind: ConvergenceKind::InDt,
        ladder: vec![1e-3, 5e-4],
        seeds: vec![4],
    });
    let text = cfg.to_toml().unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    assert_eq!(config_hash(&cfg).unwrap(), config_hash(&RunConfig::from_toml(&text).unwrap()).unwrap());
}

#[test]
fn empty_file_gives_defaults() {
    assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
}

#[test]
fn unknown_keys_are_rejected() {
    for text in [
        "colour = 1",
        "[domain]\nsize = 3",
        "[noise]\nsigma = 0.1",
        "[initial]\npreset = \"bubble\"\nradius = 1.0\nblur = 2",
        "[initial]\npreset = \"hexagon\"",
    ] {
        assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))), "{text}");
    }
}

#[test]
fn potential_ordering_is_checked() {
    let mut cfg = small(0.01);
    cfg.potential.theta = 2.5;
    let err = cfg.validate().unwrap_err();
    assert!(err.to_string().contains("theta"), "{err}");
}

#[test]
fn validation_catches_bad_sections() {
    let mut cfg = small(0.01);
    cfg.observers.cadence = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = small(0.01);
    cfg.convergence = Some(ConvergenceSection {
        kind: ConvergenceKind::InN,
        ladder: vec![16.0],
        seeds: vec![0],
    });
    assert!(cfg.validate().is_err());
    let mut cfg = small(0.01);
    cfg.initial = InitialSpec::Bubble {
        radius: 1.0,
        width: 0.3,
        amplitude: 1.5,
        swirl: 0.0,
    };
    assert!(cfg.validate().is_err(), "phase outside [-1, 1] must be refused");
}

#[test]
fn member_seeds_are_distinct_and_stable() {
    let seeds: Vec<u64> = (0..100).map(|m| member_seed(7, m)).collect();
    let mut sorted = seeds.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), seeds.len());
    assert_eq!(member_seed(7, 3), seeds[3]);
    assert_ne!(member_seed(8, 3), seeds[3]);
}

#[test]
fn explicit_worker_count_wins() {
    let cfg = small(0.01);
    assert_eq!(resolve_workers(Some(3), &cfg).unwrap(), 3);
}

#[test]
fn zero_horizon_writes_only_the_initial_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&small(0.0), dir.path()).unwrap();
    assert_eq!(out.summary.steps, 0);
    assert_eq!(out.summary.snapshots, vec!["step_00000000.bin".to_string()]);
    assert_eq!(out.ledger.len(), 1);
    let (manifest, done) = RunManifest::read(dir.path()).unwrap();
    assert_eq!(manifest.command, "run");
    assert_eq!(done.unwrap().status, "complete");
}

#[test]
fn run_directory_is_not_reused() {
    let dir = tempfile::tempdir().unwrap();
    run(&small(0.0), dir.path()).unwrap();
    assert!(run(&small(0.0), dir.path()).is_err());
}

#[test]
fn run_writes_ledger_snapshots_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(0.01);
    cfg.observers.plots = true;
    cfg.observers.snapshot_cadence = 5;
    let out = run(&cfg, dir.path()).unwrap();
    assert_eq!(out.summary.steps, 10);
    assert_eq!(out.summary.snapshots.len(), 3);
    let last = Snapshot::load(&dir.path().join("snapshots/step_00000010.bin")).unwrap();
    assert_eq!(last.header.step, 10);
    let csv = std::fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(std::fs::read_to_string(dir.path().join("energy.svg")).unwrap().contains("<svg"));
    assert!(out.summary.ito_residual.abs() < 1e-2 * out.summary.initial_energy.abs().max(1.0));
}

#[test]
fn pure_phase_run_stays_finite() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(0.01);
    cfg.initial = InitialSpec::PurePhase {
        defect: 0.0,
        defect_width: 0.3,
    };
    let out = run(&cfg, dir.path()).unwrap();
    assert!(out.summary.phase_min > 0.9 && out.summary.phase_max < 1.01, "{:?}", out.summary);
    assert!(out.summary.final_energy.is_finite());
}

#[test]
fn single_member_ensemble_gives_trivial_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(0.01);
    cfg.ensemble.members = 1;
    let out = ensemble(&cfg, dir.path(), RunOptions { workers: Some(1) }).unwrap();
    assert_eq!(out.verdict.status, VerdictStatus::Insufficient);
    assert!(out.verdict.inequality.is_none());
    assert_eq!(out.verdict.final_energy.se, 0.0);
    assert_eq!(out.members.len(), 1);
}

#[test]
fn ensemble_is_bitwise_reproducible_across_worker_counts() {
    let mut cfg = small(0.01);
    cfg.ensemble.members = 30;
    cfg.ensemble.bias_seeds = 1;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    ensemble(&cfg, a.path(), RunOptions { workers: Some(1) }).unwrap();
    ensemble(&cfg, b.path(), RunOptions { workers: Some(4) }).unwrap();
    ensemble(&cfg, c.path(), RunOptions { workers: Some(1) }).unwrap();
    for f in ["verdict.json", "terms.csv", "terms.jsonl", "members.csv"] {
        assert_eq!(bytes(&a.path().join(f)), bytes(&b.path().join(f)), "{f}");
        assert_eq!(bytes(&a.path().join(f)), bytes(&c.path().join(f)), "{f}");
    }
    let (ma, _) = RunManifest::read(a.path()).unwrap();
    let (mb, _) = RunManifest::read(b.path()).unwrap();
    assert_eq!(ma, mb);
}

#[test]
fn dependence_needs_a_second_datum() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(0.01);
    cfg.dependence = Some(DependenceSection {
        level: 10.0,
        epsilons: vec![1e-3],
        perturbation: None,
    });
    assert!(matches!(dependence(&cfg, dir.path(), None), Err(Error::Config(_))));
}

#[test]
fn zero_perturbation_gives_zero_distance() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(0.01);
    cfg.dependence = Some(DependenceSection {
        level: 1e3,
        epsilons: vec![],
        perturbation: Some(PerturbationSpec {
            seed: 2,
            velocity: 1.0,
            phase: 1.0,
            k_max: 3.0,
        }),
    });
    let study = dependence(&cfg, dir.path(), Some(&[0.0])).unwrap();
    assert_eq!(study.reports.len(), 1);
    assert_eq!(study.reports[0].final_distance, 0.0);
    assert!(dir.path().join("distances.csv").exists());
}

#[test]
fn pressure_recovery_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(0.005);
    cfg.observers.snapshot_cadence = 1;
    run(&cfg, dir.path()).unwrap();
    let first = pressure(dir.path()).unwrap();
    assert_eq!(first.steps.len(), 5);
    assert!(first.max_closure < 1e-9, "{}", first.max_closure);
    let files = ["report.json", "steps.csv", "pressure_00000003.bin"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| bytes(&dir.path().join("pressure").join(f))).collect();
    let second = pressure(dir.path()).unwrap();
    assert_eq!(first, second);
    for (f, b) in files.iter().zip(before) {
        assert_eq!(bytes(&dir.path().join("pressure").join(f)), b, "{f}");
    }
}

#[test]
fn pressure_refuses_sparse_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(0.004);
    cfg.observers.snapshot_cadence = 2;
    run(&cfg, dir.path()).unwrap();
    assert!(matches!(pressure(dir.path()), Err(Error::Config(_))));
}

#[test]
fn convergence_in_n_writes_rates() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(0.004);
    cfg.initial = InitialSpec::Bubble {
        radius: 1.5,
        width: 0.6,
        amplitude: 0.8,
        swirl: 0.3,
    };
    cfg.convergence = Some(ConvergenceSection {
        kind: ConvergenceKind::InN,
        ladder: vec![16.0, 32.0, 64.0],
        seeds: vec![0],
    });
    let report = converge(&cfg, dir.path()).unwrap();
    assert_eq!(report.distances.len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn explicit_scheme_with_dt_above_lambda_is_refused() {
    let mut cfg = small(0.01);
    cfg.stepper.scheme = crate::galerkin::Scheme::FullyExplicitEm;
    cfg.regularization.lambda = 1e-4;
    assert!(cfg.validate().is_err());
    cfg.stepper.dt = 5e-5;
    cfg.stepper.t_final = 1e-4;
    cfg.validate().unwrap();
}

#[test]
fn resting_pure_phase_without_noise_has_zero_pressure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(0.003);
    cfg.noise = crate::noise::NoiseSpec::off();
    cfg.initial = InitialSpec::PurePhase {
        defect: 0.0,
        defect_width: 0.3,
    };
    cfg.observers.snapshot_cadence = 1;
    run(&cfg, dir.path()).unwrap();
    let out = pressure(dir.path()).unwrap();
    assert_eq!(out.steps.len(), 3);
    for s in &out.steps {
        assert!(s.norm < 1e-12, "{s:?}");
    }
    assert!(out.report.primitive_sup < 1e-12);
}

#[test]
fn doubling_members_shrinks_standard_error() {
    let mut cfg = small(0.01);
    cfg.ensemble.bias_seeds = 0;
    let se = |m: usize| {
        let mut c = cfg.clone();
        c.ensemble.members = m;
        let dir = tempfile::tempdir().unwrap();
        ensemble(&c, dir.path(), RunOptions { workers: Some(2) }).unwrap().verdict.final_energy.se
    };
    let ratio = se(40) / se(80);
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn random_band_datum_does_not_depend_on_the_grid() {
    let grid_values = |n: usize| {
        let mut cfg = small(0.0);
        cfg.domain.n = n;
        cfg.initial = InitialSpec::RandomBand {
            seed: 4,
            k_min: 1.0,
            k_max: 3.0,
            peak: 0.9,
            speed: 0.4,
        };
        let p = cfg.problem(0).unwrap();
        let s = initial_state(&cfg, &p).unwrap();
        (p.basis.scalar_to_physical(&s.b), p.basis.velocity_to_physical(s.a.as_ref().unwrap()).unwrap())
    };
    let (coarse, uc) = grid_values(16);
    let (fine, uf) = grid_values(32);
    assert!(coarse.iter().all(|v| v.abs() <= 0.9 + 1e-12));
    // Every coarse node is a fine node: (ix, iy) ↦ (2ix, 2iy).
    for iy in 0..16 {
        for ix in 0..16 {
            let (c, f) = (16 * iy + ix, 32 * (2 * iy) + 2 * ix);
            assert!((coarse[c] - fine[f]).abs() < 1e-12);
            assert!((uc.x[c] - uf.x[f]).abs() < 1e-12 && (uc.y[c] - uf.y[f]).abs() < 1e-12);
        }
    }
}
