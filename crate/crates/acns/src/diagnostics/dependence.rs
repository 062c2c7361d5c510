use serde::{Deserialize, Serialize};

use super::dual_distance;
use crate::error::{Error, Result};
use crate::galerkin::{FieldState, Problem};
use crate::noise::{IncrementSource, WienerIncrement};
use crate::spectral::{ScalarField, VectorField};

/// Direction along which the second initial datum is displaced.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub velocity: Option<VectorField>,
    pub phase: ScalarField,
}

/// Inputs of a paired-path experiment.
#[derive(Debug, Clone)]
pub struct DependenceConfig {
    pub t_final: f64,
    /// Stopping level `n`: paths are stopped once
    /// `sup‖u‖² + ∫(‖u‖²_V + ‖φ‖²_{V₂})` reaches `n²` on either of them.
    pub level: f64,
    pub epsilons: Vec<f64>,
}

/// Paired-path distances of one perturbation size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub epsilon: f64,
    pub level: f64,
    /// Hitting time `ζ_n`, equal to `T` when the threshold is never reached.
    pub zeta: f64,
    pub hit: bool,
    pub times: Vec<f64>,
    /// `‖∇A⁻¹(u₁ − u₂)‖²`
    pub dual_velocity_sq: Vec<f64>,
    /// `‖φ₁ − φ₂‖²`
    pub phase_sq: Vec<f64>,
    /// `∫‖u₁ − u₂‖²`
    pub int_velocity_sq: Vec<f64>,
    /// `∫‖∇(φ₁ − φ₂)‖²`
    pub int_grad_phase_sq: Vec<f64>,
    /// `(‖∇A⁻¹δu‖² + ‖δφ‖²)^{1/2}` at `t = 0`.
    pub initial_distance: f64,
    /// The same distance at `ζ_n`.
    pub final_distance: f64,
    /// Smallest `C ≥ 0` with `d(t) ≤ e^{Ct} d(0)` on the recorded grid.
    pub gronwall_rate: f64,
    /// `exp(C(T + n⁴)) d(0)`.
    pub envelope: f64,
    pub envelope_dominates: bool,
}

impl DependenceReport {
    pub fn distance(&self, i: usize) -> f64 {
        (self.dual_velocity_sq[i] + self.phase_sq[i]).sqrt()
    }
}

/// All reports of one experiment and the fitted scaling exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceStudy {
    pub reports: Vec<DependenceReport>,
    /// Least-squares slope of `ln(final distance)` against `ln ε` over the
    /// positive perturbation sizes; `None` with fewer than two of them.
    pub slope: Option<f64>,
}

/// `sup_{s≤t}‖u(s)‖² + ∫₀ᵗ(‖u‖²_V + ‖φ‖²_{V₂})` along one path.
#[derive(Debug, Clone, Copy, Default)]
struct PathSize {
    sup_u: f64,
    integral: f64,
    // Integrand at the previous step (left end point rule).
    last: f64,
}

impl PathSize {
    fn new(problem: &Problem, s: &FieldState) -> Self {
        let mut p = Self::default();
        p.update(problem, s, 0.0);
        p
    }

    fn update(&mut self, problem: &Problem, s: &FieldState, dt: f64) {
        let basis = &*problem.basis;
        let (u_sq, u_v_sq) = s.a.as_ref().map_or((0.0, 0.0), |a| {
            (basis.norm_h_sigma(a).powi(2), basis.norm_v_sigma(a).powi(2))
        });
        self.integral += dt * self.last;
        self.sup_u = self.sup_u.max(u_sq);
        self.last = u_v_sq + basis.norm_v2(&s.b).powi(2);
    }

    fn value(&self) -> f64 {
        self.sup_u + self.integral
    }
}

/// Runs one reference path and, for every `ε`, a second path started from
/// `initial + ε·direction` under the same Brownian increments.
pub fn dependence_experiment(
    problem: &Problem,
    initial: &FieldState,
    direction: &Perturbation,
    source: &dyn IncrementSource,
    config: &DependenceConfig,
) -> Result<DependenceStudy> {
    if !(config.level > 0.0) {
        return Err(Error::param("level", "stopping level must be positive"));
    }
    if config.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::param("epsilons", "perturbation sizes must be finite and non-negative"));
    }
    let basis = &*problem.basis;
    let unit = {
        let du = direction
            .velocity
            .as_ref()
            .map_or(Ok(0.0), |d| dual_distance(basis, d, &VectorField::zeros(d.len())))?;
        (du + basis.norm_h(&direction.phase).powi(2)).sqrt()
    };
    if !(unit > 0.0) {
        return Err(Error::param("direction", "perturbation direction is zero"));
    }
    let steps = problem.steps_to(config.t_final)?;
    let mut reports = Vec::with_capacity(config.epsilons.len());
    for &eps in &config.epsilons {
        let s = eps / unit;
        let a2 = match (&initial.a, &direction.velocity) {
            (Some(a), Some(d)) => Some(a.axpy(s, d)),
            (a, _) => a.clone(),
        };
        let b2 = initial.b.axpy(s, &direction.phase);
        let second = problem.initial_state(a2, b2)?;
        reports.push(paired_run(problem, initial.clone(), second, source, config, steps, eps)?);
    }
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.epsilon > 0.0 && r.final_distance > 0.0)
        .map(|r| (r.epsilon.ln(), r.final_distance.ln()))
        .collect();
    Ok(DependenceStudy {
        slope: least_squares_slope(&pts),
        reports,
    })
}

fn paired_run(
    problem: &Problem,
    mut first: FieldState,
    mut second: FieldState,
    source: &dyn IncrementSource,
    config: &DependenceConfig,
    steps: u64,
    epsilon: f64,
) -> Result<DependenceReport> {
    let basis = &*problem.basis;
    let dt = problem.stepper.dt;
    let (mut size1, mut size2) = (PathSize::new(problem, &first), PathSize::new(problem, &second));
    if size1.value().max(size2.value()) >= config.level * config.level {
        return Err(Error::StoppedAtStart { n: config.level });
    }
    let mut report = DependenceReport {
        epsilon,
        level: config.level,
        zeta: config.t_final,
        hit: false,
        times: Vec::new(),
        dual_velocity_sq: Vec::new(),
        phase_sq: Vec::new(),
        int_velocity_sq: Vec::new(),
        int_grad_phase_sq: Vec::new(),
        initial_distance: 0.0,
        final_distance: 0.0,
        gronwall_rate: 0.0,
        envelope: 0.0,
        envelope_dominates: true,
    };
    let (mut int_u, mut int_g) = (0.0, 0.0);
    let mut last = (0.0, 0.0);
    let mut record = |r: &mut DependenceReport, f: &FieldState, s: &FieldState, dt: f64| -> Result<()> {
        let db = f.b.sub(&s.b);
        let (dual, u_sq) = match (&f.a, &s.a) {
            (Some(a1), Some(a2)) => (dual_distance(basis, a1, a2)?, basis.norm_h_sigma(&a1.sub(a2)).powi(2)),
            _ => (0.0, 0.0),
        };
        int_u += dt * last.0;
        int_g += dt * last.1;
        last = (u_sq, basis.norm_grad(&db).powi(2));
        r.times.push(f.t);
        r.dual_velocity_sq.push(dual);
        r.phase_sq.push(basis.norm_h(&db).powi(2));
        r.int_velocity_sq.push(int_u);
        r.int_grad_phase_sq.push(int_g);
        Ok(())
    };
    record(&mut report, &first, &second, 0.0)?;
    for _ in 0..steps {
        let inc = if problem.noise.is_off() {
            WienerIncrement::zeros(dt, problem.noise.k1(), problem.noise.k2())
        } else {
            source.increment(first.step, dt)?
        };
        first = problem.step(&first, &inc)?.0;
        second = problem.step(&second, &inc)?.0;
        size1.update(problem, &first, dt);
        size2.update(problem, &second, dt);
        record(&mut report, &first, &second, dt)?;
        if size1.value().max(size2.value()) >= config.level * config.level {
            report.zeta = first.t;
            report.hit = true;
            break;
        }
    }
    let d0 = report.distance(0);
    let last_i = report.times.len() - 1;
    report.initial_distance = d0;
    report.final_distance = report.distance(last_i);
    if d0 > 0.0 {
        let rate = (1..=last_i)
            .filter(|&i| report.times[i] > 0.0)
            .map(|i| (report.distance(i) / d0).ln() / report.times[i])
            .fold(0.0f64, f64::max);
        report.gronwall_rate = rate;
        report.envelope = (rate * (config.t_final + config.level.powi(4))).exp() * d0;
    }
    report.envelope_dominates = (0..=last_i).all(|i| report.distance(i) <= report.envelope * (1.0 + 1e-12));
    Ok(report)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
