use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConvergenceSection, RunConfig};
use super::initial::{initial_state, perturbation};
use super::manifest::{member_seed, Completion, MemberSeed, RunManifest};
use super::output::{line_plot, write_csv, write_json, write_jsonl, Curve};
use crate::diagnostics::{
    convergence_study, dependence_experiment, estimate_bias, ito_residual, verify_energy_inequality, BiasAllowance,
    ConvergenceKind, ConvergenceReport, DependenceConfig, DependenceStudy, EnergyLedger, Estimate,
    InequalityConstants, InequalityVerdict, LedgerRecord, MIN_MEMBERS,
};
use crate::error::{Error, Result};
use crate::galerkin::{FieldState, Observer, Problem, StepTerms};
use crate::noise::HsNorms;
use crate::pressure::{pressure_norm_report, pressure_series, PressureNormReport, PressureStep};
use crate::spectral::snapshot::{Header, Snapshot};
use crate::spectral::VectorField;

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "ACNS_WORKERS";

/// Settings that do not change any artifact.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; takes precedence over the environment and the
    /// configuration.
    pub workers: Option<usize>,
}

/// Worker count from, in order, the explicit option, `ACNS_WORKERS`, and the
/// configuration (`0` lets the pool decide).
pub fn resolve_workers(explicit: Option<usize>, cfg: &RunConfig) -> Result<usize> {
    if let Some(w) = explicit {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(cfg.ensemble.workers),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

fn finish(dir: &Path, started: Instant, workers: usize) -> Result<()> {
    RunManifest::finish(
        dir,
        Completion {
            status: "complete".into(),
            wall_seconds: started.elapsed().as_secs_f64(),
            workers,
        },
    )
}

// ---- observers --------------------------------------------------------------

/// Writes snapshots every `cadence` steps (only the first when `cadence` is
/// zero).
struct SnapshotWriter {
    dir: PathBuf,
    cadence: u64,
    last: Option<u64>,
}

impl SnapshotWriter {
    fn write(&mut self, problem: &Problem, state: &FieldState) -> Result<()> {
        let header = Header::for_basis(&problem.basis, state.t, state.lambda, state.step);
        let snap = Snapshot::from_fields(&problem.basis, header, state.a.as_ref(), &state.b, &state.c)?;
        snap.save(&self.dir.join(snapshot_name(state.step)))?;
        self.last = Some(state.step);
        Ok(())
    }
}

fn snapshot_name(step: u64) -> String {
    format!("step_{step:08}.bin")
}

impl Observer for SnapshotWriter {
    fn observe(&mut self, problem: &Problem, state: &FieldState, _: Option<&StepTerms>) -> Result<()> {
        let due = if self.cadence == 0 {
            state.step == 0
        } else {
            state.step.is_multiple_of(self.cadence)
        };
        if due {
            self.write(problem, state)?;
        }
        Ok(())
    }
}

/// Smallest and largest grid value of `φ` seen along a trajectory.
#[derive(Default)]
struct PhaseRange {
    min: f64,
    max: f64,
    seen: bool,
}

impl Observer for PhaseRange {
    fn observe(&mut self, _: &Problem, state: &FieldState, _: Option<&StepTerms>) -> Result<()> {
        for &v in &state.pointwise.phi {
            if !self.seen {
                (self.min, self.max, self.seen) = (v, v, true);
            }
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
        Ok(())
    }
}

// ---- single trajectory ------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps: u64,
    pub t_final: f64,
    pub sup_phase: f64,
    pub phase_min: f64,
    pub phase_max: f64,
    pub max_excursion_fraction: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub ito_residual: f64,
    pub final_record: LedgerRecord,
    pub final_noise_norms: HsNorms,
    pub snapshots: Vec<String>,
}

pub struct RunOutcome {
    pub summary: RunSummary,
    pub ledger: Vec<LedgerRecord>,
}

/// Single trajectory with seed `noise.seed`: snapshots, energy ledger CSV,
/// summary JSON and an energy plot.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let seed = cfg.noise.seed;
    let mut outputs = vec!["snapshots/", "ledger.csv", "summary.json"];
    if cfg.observers.plots {
        outputs.push("energy.svg");
    }
    RunManifest::new("run", cfg, vec![MemberSeed { member: 0, seed }], &outputs)?.start(dir)?;

    let problem = cfg.problem(seed)?;
    let initial = initial_state(cfg, &problem)?;
    let initial_energy = problem.energy(&initial);
    let snap_dir = dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir)?;
    let mut snaps = SnapshotWriter {
        dir: snap_dir.clone(),
        cadence: cfg.observers.snapshot_cadence,
        last: None,
    };
    let mut ledger = EnergyLedger::new(cfg.observers.cadence);
    let mut range = PhaseRange::default();
    let summary = problem.simulate(
        initial,
        cfg.stepper.t_final,
        &problem.noise,
        &mut [&mut ledger, &mut snaps, &mut range],
    )?;
    let last = summary.final_state;
    if snaps.last != Some(last.step) {
        snaps.write(&problem, &last)?;
    }
    let mut records = ledger.records().to_vec();
    let latest = *ledger.latest().expect("initial state observed");
    if records.last().map(|r| r.step) != Some(latest.step) {
        records.push(latest);
    }
    write_csv(&dir.join("ledger.csv"), &records)?;
    let mut snapshots: Vec<String> = std::fs::read_dir(&snap_dir)?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    snapshots.sort();
    let out = RunSummary {
        seed,
        steps: summary.steps,
        t_final: last.t,
        sup_phase: summary.sup_phase,
        phase_min: range.min,
        phase_max: range.max,
        max_excursion_fraction: summary.max_excursion_fraction,
        initial_energy,
        final_energy: problem.energy(&last),
        ito_residual: ito_residual(&records[0], &latest),
        final_record: latest,
        final_noise_norms: problem.noise.hs_norms(
            &problem.basis,
            &problem.layer,
            &problem.potential,
            &last.b,
            last.a.as_ref(),
        )?,
        snapshots,
    };
    write_json(&dir.join("summary.json"), &out)?;
    if cfg.observers.plots {
        let curve = |label: &str, f: fn(&LedgerRecord) -> f64| {
            Curve::new(label, records.iter().map(|r| (r.t, f(r))).collect())
        };
        line_plot(
            &dir.join("energy.svg"),
            "Energy ledger",
            "t",
            "energy",
            &[
                curve("E_λ", LedgerRecord::energy),
                curve("E_λ + dissipation", |r| r.energy() + r.dissipation()),
                curve("kinetic", |r| r.kinetic),
                curve("interface", |r| r.interface),
                curve("potential", |r| r.potential),
            ],
        )?;
    }
    finish(dir, started, 1)?;
    Ok(RunOutcome { summary: out, ledger: records })
}

// ---- ensemble ---------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    /// Too few members for the Monte-Carlo check.
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleVerdict {
    pub status: VerdictStatus,
    pub members: usize,
    pub reason: Option<String>,
    pub final_energy: Estimate,
    pub inequality: Option<InequalityVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRow {
    pub member: usize,
    pub seed: u64,
    pub steps: u64,
    pub sup_phase: f64,
    pub final_energy: f64,
    pub dissipation: f64,
    pub noise_input: f64,
    pub martingale: f64,
    pub ito_residual: f64,
}

pub struct EnsembleOutcome {
    pub verdict: EnsembleVerdict,
    pub members: Vec<MemberRow>,
    pub ledgers: Vec<Vec<LedgerRecord>>,
}

/// Flat row of the term table.
#[derive(Debug, Clone, Copy, Serialize)]
struct TermCsv {
    t: f64,
    tau: f64,
    kinetic: f64,
    interface: f64,
    potential: f64,
    dissipation: f64,
    lhs: f64,
    growth: f64,
    initial_energy: f64,
    velocity_feedback: f64,
    phase_feedback: f64,
    rhs: f64,
    difference: f64,
    difference_se: f64,
    allowance: f64,
    margin: f64,
    pass: bool,
}

/// `M` members in parallel, aggregated in member order, followed by the
/// energy-inequality verdict.
pub fn ensemble(cfg: &RunConfig, dir: &Path, opts: RunOptions) -> Result<EnsembleOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let workers = resolve_workers(opts.workers, cfg)?;
    let m = cfg.ensemble.members;
    let seeds: Vec<MemberSeed> = (0..m)
        .map(|member| MemberSeed {
            member,
            seed: member_seed(cfg.ensemble.base_seed, member),
        })
        .collect();
    let mut outputs = vec!["members.csv", "verdict.json", "terms.csv", "terms.jsonl"];
    if cfg.observers.plots {
        outputs.push("energy.svg");
    }
    RunManifest::new("ensemble", cfg, seeds.clone(), &outputs)?.start(dir)?;

    let basis = cfg.basis()?;
    let base = cfg.problem_on(basis.clone(), cfg.ensemble.base_seed)?;
    let initial = initial_state(cfg, &base)?;
    let t_final = cfg.stepper.t_final;
    let results: Vec<Result<(MemberRow, Vec<LedgerRecord>)>> = pool(workers)?.install(|| {
        seeds
            .par_iter()
            .map(|s| {
                let problem = base.clone().with_noise(base.noise.with_seed(s.seed));
                let mut ledger = EnergyLedger::new(cfg.observers.cadence);
                let summary = problem.simulate(initial.clone(), t_final, &problem.noise, &mut [&mut ledger])?;
                let last = *ledger.latest().expect("initial state observed");
                let first = ledger.records()[0];
                let row = MemberRow {
                    member: s.member,
                    seed: s.seed,
                    steps: summary.steps,
                    sup_phase: summary.sup_phase,
                    final_energy: last.energy(),
                    dissipation: last.dissipation(),
                    noise_input: last.noise_input(),
                    martingale: last.martingale,
                    ito_residual: ito_residual(&first, &last),
                };
                Ok((row, ledger.into_records()))
            })
            .collect()
    });
    let mut failures = Vec::new();
    let mut members = Vec::with_capacity(m);
    let mut ledgers = Vec::with_capacity(m);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((row, l)) => {
                members.push(row);
                ledgers.push(l);
            }
            Err(e) => failures.push((i, e)),
        }
    }
    if !failures.is_empty() {
        #[derive(Serialize)]
        struct Failure {
            member: usize,
            seed: u64,
            error: String,
        }
        write_jsonl(
            &dir.join("failures.jsonl"),
            failures.iter().map(|(i, e)| Failure {
                member: *i,
                seed: seeds[*i].seed,
                error: e.to_string(),
            }),
        )?;
        let (member, source) = failures.swap_remove(0);
        return Err(Error::Member {
            member,
            source: Box::new(source),
        });
    }
    write_csv(&dir.join("members.csv"), &members)?;

    let finals: Vec<f64> = members.iter().map(|r| r.final_energy).collect();
    let (mean, se) = crate::diagnostics::mean_and_se(&finals);
    let final_energy = Estimate { mean, se };
    let verdict = if m < MIN_MEMBERS {
        EnsembleVerdict {
            status: VerdictStatus::Insufficient,
            members: m,
            reason: Some(Error::InsufficientEnsemble { got: m, need: MIN_MEMBERS }.to_string()),
            final_energy,
            inequality: None,
        }
    } else {
        let bias_seeds: Vec<u64> = (0..cfg.ensemble.bias_seeds)
            .map(|i| member_seed(cfg.ensemble.base_seed, m + i))
            .collect();
        let bias = if bias_seeds.is_empty() {
            BiasAllowance::none()
        } else {
            estimate_bias(&base, &initial, t_final, &bias_seeds)?
        };
        let v = verify_energy_inequality(&ledgers, InequalityConstants::from_problem(&base), bias)?;
        EnsembleVerdict {
            status: if v.pass { VerdictStatus::Pass } else { VerdictStatus::Fail },
            members: m,
            reason: None,
            final_energy,
            inequality: Some(v),
        }
    };
    let rows: Vec<TermCsv> = verdict
        .inequality
        .iter()
        .flat_map(|v| v.rows.iter())
        .map(|r| TermCsv {
            t: r.t,
            tau: r.tau,
            kinetic: r.kinetic.mean,
            interface: r.interface.mean,
            potential: r.potential.mean,
            dissipation: r.dissipation.mean,
            lhs: r.lhs,
            growth: r.growth,
            initial_energy: r.initial_energy.mean,
            velocity_feedback: r.velocity_feedback.mean,
            phase_feedback: r.phase_feedback.mean,
            rhs: r.rhs,
            difference: r.difference.mean,
            difference_se: r.difference.se,
            allowance: r.allowance,
            margin: r.margin,
            pass: r.pass,
        })
        .collect();
    write_csv(&dir.join("terms.csv"), &rows)?;
    write_jsonl(&dir.join("terms.jsonl"), verdict.inequality.iter().flat_map(|v| v.rows.iter()))?;
    write_json(&dir.join("verdict.json"), &verdict)?;
    if cfg.observers.plots {
        ensemble_plot(&dir.join("energy.svg"), &ledgers, &verdict)?;
    }
    finish(dir, started, workers)?;
    Ok(EnsembleOutcome {
        verdict,
        members,
        ledgers,
    })
}

fn ensemble_plot(path: &Path, ledgers: &[Vec<LedgerRecord>], verdict: &EnsembleVerdict) -> Result<()> {
    let band_of = |f: &dyn Fn(&LedgerRecord) -> f64| {
        let mut points = Vec::new();
        let mut band = Vec::new();
        for i in 0..ledgers[0].len() {
            let xs: Vec<f64> = ledgers.iter().map(|l| f(&l[i])).collect();
            let (mean, se) = crate::diagnostics::mean_and_se(&xs);
            let t = ledgers[0][i].t;
            points.push((t, mean));
            band.push((t, mean - 2.0 * se, mean + 2.0 * se));
        }
        (points, band)
    };
    let (points, band) = band_of(&|r| r.energy() + r.dissipation());
    let mut total = Curve::new("E[E_λ + dissipation] ± 2 SE", points);
    total.band = Some(band);
    let (points, band) = band_of(&|r| r.energy());
    let mut energy = Curve::new("E[E_λ] ± 2 SE", points);
    energy.band = Some(band);
    let mut curves = vec![total, energy];
    if let Some(v) = &verdict.inequality {
        curves.push(Curve::new("right-hand side", v.rows.iter().map(|r| (r.t, r.rhs)).collect()));
    }
    line_plot(path, "Ensemble energy", "t", "energy", &curves)
}

// ---- continuous dependence --------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
struct DependenceRow {
    epsilon: f64,
    initial_distance: f64,
    final_distance: f64,
    zeta: f64,
    hit: bool,
    gronwall_rate: f64,
    envelope: f64,
    envelope_dominates: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct DistanceRow {
    epsilon: f64,
    t: f64,
    dual_velocity_sq: f64,
    phase_sq: f64,
    int_velocity_sq: f64,
    int_grad_phase_sq: f64,
}

/// Paired-path experiment; `epsilons` replaces the configured list when
/// given.
pub fn dependence(cfg: &RunConfig, dir: &Path, epsilons: Option<&[f64]>) -> Result<DependenceStudy> {
    cfg.validate()?;
    let section = cfg
        .dependence
        .as_ref()
        .ok_or_else(|| Error::Config("the [dependence] section is missing".into()))?;
    let spec = section.perturbation.as_ref().ok_or_else(|| {
        Error::Config("dependence.perturbation (the second initial datum) is missing".into())
    })?;
    let eps: Vec<f64> = epsilons.map(<[f64]>::to_vec).unwrap_or_else(|| section.epsilons.clone());
    if eps.is_empty() {
        return Err(Error::Config("no perturbation sizes given".into()));
    }
    let started = Instant::now();
    let seed = cfg.noise.seed;
    let mut outputs = vec!["dependence.jsonl", "dependence.csv", "distances.csv", "study.json"];
    if cfg.observers.plots {
        outputs.push("scaling.svg");
    }
    RunManifest::new("dependence", cfg, vec![MemberSeed { member: 0, seed }], &outputs)?.start(dir)?;
    let problem = cfg.problem(seed)?;
    let initial = initial_state(cfg, &problem)?;
    let direction = perturbation(spec, &problem.basis)?;
    let study = dependence_experiment(
        &problem,
        &initial,
        &direction,
        &problem.noise,
        &DependenceConfig {
            t_final: cfg.stepper.t_final,
            level: section.level,
            epsilons: eps,
        },
    )?;
    write_jsonl(&dir.join("dependence.jsonl"), &study.reports)?;
    write_csv(
        &dir.join("dependence.csv"),
        study.reports.iter().map(|r| DependenceRow {
            epsilon: r.epsilon,
            initial_distance: r.initial_distance,
            final_distance: r.final_distance,
            zeta: r.zeta,
            hit: r.hit,
            gronwall_rate: r.gronwall_rate,
            envelope: r.envelope,
            envelope_dominates: r.envelope_dominates,
        }),
    )?;
    write_csv(
        &dir.join("distances.csv"),
        study.reports.iter().flat_map(|r| {
            (0..r.times.len()).map(move |i| DistanceRow {
                epsilon: r.epsilon,
                t: r.times[i],
                dual_velocity_sq: r.dual_velocity_sq[i],
                phase_sq: r.phase_sq[i],
                int_velocity_sq: r.int_velocity_sq[i],
                int_grad_phase_sq: r.int_grad_phase_sq[i],
            })
        }),
    )?;
    #[derive(Serialize)]
    struct StudySummary {
        slope: Option<f64>,
        epsilons: Vec<f64>,
        final_distances: Vec<f64>,
    }
    write_json(
        &dir.join("study.json"),
        &StudySummary {
            slope: study.slope,
            epsilons: study.reports.iter().map(|r| r.epsilon).collect(),
            final_distances: study.reports.iter().map(|r| r.final_distance).collect(),
        },
    )?;
    if cfg.observers.plots {
        let pts: Vec<(f64, f64)> = study
            .reports
            .iter()
            .filter(|r| r.epsilon > 0.0 && r.final_distance > 0.0)
            .map(|r| (r.epsilon.log10(), r.final_distance.log10()))
            .collect();
        let mut curves = vec![Curve::new("stopped final distance", pts.clone())];
        if let Some(&(x0, y0)) = pts.first() {
            curves.push(Curve::new("slope 1", pts.iter().map(|&(x, _)| (x, y0 + (x - x0))).collect()));
        }
        line_plot(&dir.join("scaling.svg"), "Continuous dependence", "log10 ε", "log10 distance", &curves)?;
    }
    finish(dir, started, 1)?;
    Ok(study)
}

// ---- pressure ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureOutcome {
    pub steps: Vec<PressureStep>,
    pub max_closure: f64,
    pub max_mean: f64,
    pub max_mean_force: f64,
    pub report: PressureNormReport,
}

/// Pressure of a completed `run` directory written with
/// `snapshot_cadence = 1`. Results go to `<dir>/pressure/`; a rerun
/// rewrites identical files.
pub fn pressure(dir: &Path) -> Result<PressureOutcome> {
    let (manifest, _) = RunManifest::read(dir)?;
    if manifest.command != "run" {
        return Err(Error::Config(format!(
            "pressure recovery needs a `run` directory, found `{}`",
            manifest.command
        )));
    }
    let cfg = manifest.config;
    let seed = manifest.seeds.first().map_or(cfg.noise.seed, |s| s.seed);
    let problem = cfg.problem(seed)?;
    let snap_dir = dir.join("snapshots");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&snap_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "bin"))
        .collect();
    files.sort();
    let mut states = Vec::with_capacity(files.len());
    for f in &files {
        let snap = Snapshot::load(f)?;
        let (a, b, _) = snap.to_fields(&problem.basis)?;
        states.push(problem.state(snap.header.t, snap.header.step, a, b)?);
    }
    if states.windows(2).any(|w| w[1].step != w[0].step + 1) {
        return Err(Error::Config(
            "pressure recovery needs a snapshot at every step (observers.snapshot_cadence = 1)".into(),
        ));
    }
    let series = pressure_series(&problem, &states, &problem.noise)?;
    let report = pressure_norm_report(&problem, &series, &states);
    let out = dir.join("pressure");
    std::fs::create_dir_all(&out)?;
    let zero_u = problem.basis.has_velocity().then(|| VectorField::zeros(problem.basis.len()));
    for ((s, pi), prim) in series.steps.iter().zip(&series.pressure).zip(&series.primitive) {
        // Pressure records reuse the field layout: phase slot π, chemical
        // potential slot the time primitive Π, velocity slot zero.
        let header = Header::for_basis(&problem.basis, s.t, problem.layer.lambda(), s.step);
        Snapshot::from_fields(&problem.basis, header, zero_u.as_ref(), pi, prim)?
            .save(&out.join(format!("pressure_{:08}.bin", s.step)))?;
    }
    write_csv(&out.join("steps.csv"), &series.steps)?;
    let outcome = PressureOutcome {
        max_closure: series.max_closure(),
        max_mean: series.max_mean(),
        max_mean_force: series.steps.iter().map(|s| s.mean_force).fold(0.0, f64::max),
        steps: series.steps,
        report,
    };
    #[derive(Serialize)]
    struct Report<'a> {
        max_closure: f64,
        max_mean: f64,
        max_mean_force: f64,
        norms: &'a PressureNormReport,
    }
    write_json(
        &out.join("report.json"),
        &Report {
            max_closure: outcome.max_closure,
            max_mean: outcome.max_mean,
            max_mean_force: outcome.max_mean_force,
            norms: &outcome.report,
        },
    )?;
    Ok(outcome)
}

// ---- self-convergence -------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
struct ConvergenceRow {
    coarse: f64,
    fine: f64,
    distance: f64,
}

/// Runs the `[convergence]` study: every rung is the configuration with the
/// ladder value substituted for `domain.n`, `regularization.lambda` or
/// `stepper.dt`.
pub fn converge(cfg: &RunConfig, dir: &Path) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let section: &ConvergenceSection = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| Error::Config("the [convergence] section is missing".into()))?;
    let started = Instant::now();
    let seeds: Vec<MemberSeed> = section
        .seeds
        .iter()
        .enumerate()
        .map(|(member, &seed)| MemberSeed { member, seed })
        .collect();
    let mut outputs = vec!["convergence.json", "convergence.csv"];
    if cfg.observers.plots {
        outputs.push("convergence.svg");
    }
    RunManifest::new("converge", cfg, seeds, &outputs)?.start(dir)?;
    let report = convergence_study(section.kind, &section.ladder, &section.seeds, cfg.stepper.t_final, |p, seed| {
        let rung = rung_config(cfg, section.kind, p)?;
        let problem = rung.problem(seed)?;
        let init = initial_state(&rung, &problem)?;
        Ok((problem, init))
    })?;
    write_json(&dir.join("convergence.json"), &report)?;
    write_csv(
        &dir.join("convergence.csv"),
        report.distances.iter().enumerate().map(|(i, d)| ConvergenceRow {
            coarse: report.ladder[i],
            fine: report.ladder[i + 1],
            distance: *d,
        }),
    )?;
    if cfg.observers.plots {
        let pts = report
            .distances
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0.0)
            .map(|(i, d)| (report.ladder[i + 1].log10(), d.log10()))
            .collect();
        line_plot(
            &dir.join("convergence.svg"),
            "Self-convergence",
            "log10 parameter of the finer rung",
            "log10 distance",
            &[Curve::new("successive distance", pts)],
        )?;
    }
    finish(dir, started, 1)?;
    Ok(report)
}

fn rung_config(cfg: &RunConfig, kind: ConvergenceKind, p: f64) -> Result<RunConfig> {
    let mut rung = cfg.clone();
    match kind {
        ConvergenceKind::InN => {
            if p.fract() != 0.0 || p < 4.0 {
                return Err(Error::Config(format!("grid size {p} is not an integer ≥ 4")));
            }
            rung.domain.n = p as usize;
        }
        ConvergenceKind::InLambda => rung.regularization.lambda = p,
        ConvergenceKind::InDt => rung.stepper.dt = p,
    }
    Ok(rung)
}
