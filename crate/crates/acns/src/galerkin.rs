//! The Faedo–Galerkin system and its Euler–Maruyama time discretization.
//!
//! Unknowns are the coefficient vectors `a` (velocity), `b` (phase) and
//! `c` (chemical potential). `c` is never integrated: it is reassembled
//! from `b` as `c = α b + P F'_λ(φ)` whenever a state is built.
//!
//! The semi-implicit step is
//!
//! ```text
//! (1 + dt β) a⁺ = a + dt [−B(u) + P(μ∇φ)] + G₁(u) ΔW₁
//! (1 + dt α) b⁺ = b − dt [u·∇φ + P F'_λ(φ)] + G₂,λ(φ) ΔW₂
//! ```
//!
//! with all right-hand sides at the old level.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{IncrementSource, NoiseModel, WienerIncrement};
use crate::potential::{PotentialSpec, YosidaLayer, YosidaPoint};
use crate::spectral::{ScalarField, SpectralBasis, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    SemiImplicitEm,
    FullyExplicitEm,
}

/// Time-stepping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Phase excursions beyond this magnitude are counted, never clipped.
    pub max_phase_clip: f64,
    /// Check linear stability of the explicit scheme up front and the
    /// advective CFL number `max|u| dt / h ≤ 1` at every step.
    pub cfl_guard: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::SemiImplicitEm,
            max_phase_clip: 1.0,
            cfl_guard: true,
        }
    }
}

impl StepperConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }
}

/// Switches for the individual terms. Everything is on in the physical
/// model; the switches exist to isolate terms in tests and studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    /// `B(u, u)`
    pub advection: bool,
    /// Korteweg force and transport of the phase.
    pub coupling: bool,
    /// `F'_λ` in the chemical potential.
    pub potential: bool,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            advection: true,
            coupling: true,
            potential: true,
        }
    }
}

impl Physics {
    pub fn linear() -> Self {
        Self {
            advection: false,
            coupling: false,
            potential: false,
        }
    }
}

/// Everything that stays fixed along a trajectory.
#[derive(Debug, Clone)]
pub struct Problem {
    pub basis: Arc<SpectralBasis>,
    pub potential: PotentialSpec,
    pub layer: YosidaLayer,
    pub noise: NoiseModel,
    pub stepper: StepperConfig,
    pub physics: Physics,
}

impl Problem {
    pub fn new(
        basis: Arc<SpectralBasis>,
        potential: PotentialSpec,
        layer: YosidaLayer,
        noise: NoiseModel,
        stepper: StepperConfig,
    ) -> Result<Self> {
        let p = Self {
            basis,
            potential,
            layer,
            noise,
            stepper,
            physics: Physics::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_physics(mut self, physics: Physics) -> Self {
        self.physics = physics;
        self
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_stepper(mut self, stepper: StepperConfig) -> Result<Self> {
        self.stepper = stepper;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.stepper;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {}", s.dt)));
        }
        if !(s.max_phase_clip > 0.0) {
            return Err(Error::param("max_phase_clip", "must be positive"));
        }
        if s.scheme == Scheme::FullyExplicitEm {
            if s.dt > self.layer.lambda() {
                return Err(Error::param(
                    "dt",
                    format!(
                        "the fully explicit scheme needs dt ≤ λ, got dt = {} > λ = {}",
                        s.dt,
                        self.layer.lambda()
                    ),
                ));
            }
            if s.cfl_guard {
                let k = self.basis.cutoff() as f64 * 2.0 * std::f64::consts::PI / self.basis.length();
                let top = 2.0 * k * k;
                let factor = match self.basis.boundary() {
                    crate::spectral::BoundaryMode::Periodic => 1.0,
                    crate::spectral::BoundaryMode::NeumannCosine => 0.25,
                };
                if s.dt * top * factor > 2.0 {
                    return Err(Error::param(
                        "dt",
                        format!("explicit diffusion is unstable: dt·max α = {} > 2", s.dt * top * factor),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Pointwise Yosida quantities of the phase on the grid and the
    /// chemical potential `c = α b + P F'_λ(φ)`.
    pub fn assemble_mu(&self, b: &ScalarField) -> Result<(ScalarField, Pointwise)> {
        let basis = &*self.basis;
        let phi = basis.scalar_to_physical(b);
        let points = self.layer.points(&self.potential, &phi)?;
        let mut c = basis.laplacian(b).scaled(-1.0);
        if self.physics.potential {
            let fp: Vec<f64> = points.iter().map(|p| p.fprime).collect();
            c.add_assign_scaled(1.0, &basis.scalar_from_physical(&fp));
        }
        Ok((c, Pointwise { phi, points }))
    }

    /// State at time `t` built from `(a, b)`.
    pub fn state(&self, t: f64, step: u64, a: Option<VectorField>, b: ScalarField) -> Result<FieldState> {
        let basis = &*self.basis;
        if a.is_some() != basis.has_velocity() {
            return Err(Error::BasisMismatch(
                "velocity must be present exactly when the basis carries velocity".into(),
            ));
        }
        if let Some(a) = &a {
            if a.len() != basis.len() {
                return Err(Error::ModeMismatch {
                    expected: basis.len(),
                    got: a.len(),
                });
            }
            if a.coefficients()[0].norm() != 0.0 {
                return Err(Error::BasisMismatch("velocity has a non-zero mean mode".into()));
            }
        }
        if b.len() != basis.len() {
            return Err(Error::ModeMismatch {
                expected: basis.len(),
                got: b.len(),
            });
        }
        let (c, pointwise) = self.assemble_mu(&b)?;
        Ok(FieldState {
            t,
            step,
            lambda: self.layer.lambda(),
            a,
            b,
            c,
            pointwise,
        })
    }

    /// Initial state from projected data; checks `‖φ₀‖_∞ ≤ 1` on the grid.
    pub fn initial_state(&self, a: Option<VectorField>, b: ScalarField) -> Result<FieldState> {
        let s = self.state(0.0, 0, a, b)?;
        let sup = s.sup_phase();
        if !(sup <= 1.0 + 1e-12) {
            return Err(Error::param(
                "initial",
                format!("initial phase must satisfy |φ₀| ≤ 1 on the grid, found {sup}"),
            ));
        }
        Ok(s)
    }

    /// Deterministic right-hand sides `(da/dt, db/dt)`.
    pub fn drift(&self, state: &FieldState) -> Result<Drift> {
        let ex = self.explicit_terms(state)?;
        let basis = &*self.basis;
        let velocity = match (&state.a, ex.velocity) {
            (Some(a), Some(v)) => Some(v.axpy(-1.0, &basis.stokes(a)?)),
            _ => None,
        };
        let phase = ex.phase.axpy(-1.0, &state.linear_mu(basis));
        Ok(Drift { velocity, phase })
    }

    /// Explicit parts: `−B(u) + P(μ∇φ)` and `−u·∇φ − P F'_λ(φ)`.
    fn explicit_terms(&self, state: &FieldState) -> Result<Explicit> {
        let basis = &*self.basis;
        let mut phase = state.c.sub(&state.linear_mu(basis)).scaled(-1.0);
        let mut velocity = None;
        let mut max_speed = 0.0f64;
        if let Some(a) = &state.a {
            let mut v = VectorField::zeros(basis.len());
            let need_u = self.physics.advection || self.physics.coupling || self.stepper.cfl_guard;
            if need_u {
                let uc = basis.velocity_components(a)?;
                let uph = basis.vector_to_physical(&uc);
                max_speed = uph
                    .x
                    .iter()
                    .zip(&uph.y)
                    .map(|(x, y)| (x * x + y * y).sqrt())
                    .fold(0.0, f64::max);
                if self.physics.advection {
                    let adv = basis.advect_physical(&uph, &uc);
                    v.add_assign_scaled(-1.0, &basis.leray_project(&adv)?);
                }
                if self.physics.coupling {
                    let grad = basis.vector_to_physical(&basis.gradient(&state.b));
                    let mu = basis.scalar_to_physical(&state.c);
                    let force = crate::spectral::SpectralVector {
                        x: basis.product(&mu, &grad.x),
                        y: basis.product(&mu, &grad.y),
                    };
                    v.add_assign_scaled(1.0, &basis.leray_project(&force)?);
                    phase.add_assign_scaled(-1.0, &basis.convect_physical(&uph, &grad));
                }
            }
            velocity = Some(v);
        }
        Ok(Explicit {
            velocity,
            phase,
            max_speed,
        })
    }

    /// One Euler–Maruyama step with the given increment.
    pub fn step(&self, state: &FieldState, inc: &WienerIncrement) -> Result<(FieldState, StepTerms)> {
        let basis = &*self.basis;
        let dt = self.stepper.dt;
        if (inc.dt - dt).abs() > 1e-12 * dt {
            return Err(Error::param("increment", format!("increment has dt = {}, stepper dt = {dt}", inc.dt)));
        }
        let ex = self.explicit_terms(state)?;
        if self.stepper.cfl_guard && state.a.is_some() {
            let cfl = ex.max_speed * dt / basis.spacing();
            if cfl > 1.0 {
                return Err(Error::BlowUp {
                    step: state.step,
                    t: state.t,
                    detail: format!("advective CFL number {cfl:.3} exceeds 1"),
                });
            }
        }
        let explicit = self.stepper.scheme == Scheme::FullyExplicitEm;

        // Velocity.
        let mut g1_hs = 0.0;
        let mut martingale = 0.0;
        let a_next = match (&state.a, ex.velocity) {
            (Some(a), Some(v)) => {
                let mut rhs = a.axpy(dt, &v);
                if self.noise.velocity_active() {
                    let g = self.noise.apply_g1(basis, a, &inc.dw1)?;
                    g1_hs = self.noise.g1_hs_squared(basis, a);
                    martingale += basis.inner_velocity(a, &g);
                    rhs.add_assign_scaled(1.0, &g);
                }
                let coeffs = rhs
                    .coefficients()
                    .iter()
                    .enumerate()
                    .map(|(i, z)| {
                        let beta = basis.eigenvalue(i);
                        if explicit {
                            z - a.coefficients()[i] * (dt * beta)
                        } else {
                            z / (1.0 + dt * beta)
                        }
                    })
                    .collect();
                Some(VectorField::from_coefficients(coeffs))
            }
            _ => None,
        };

        // Phase.
        let mut rhs = state.b.axpy(dt, &ex.phase);
        let (mut grad_g2, mut compensation) = (0.0, 0.0);
        if self.noise.phase_active() {
            let j: Vec<f64> = state.pointwise.points.iter().map(|p| p.resolvent).collect();
            let profile = NoiseModel::g2_profile(basis, &j);
            let factor = self.noise.g2_factor(&inc.dw2)?;
            let g = profile.scaled(factor);
            martingale += basis.inner_scalar(&state.c, &g);
            rhs.add_assign_scaled(1.0, &g);
            let s2 = self.noise.s2();
            grad_g2 = s2 * basis.norm_grad(&profile).powi(2);
            let pp = basis.scalar_to_physical(&profile);
            let w: Vec<f64> = pp
                .iter()
                .zip(&state.pointwise.points)
                .map(|(v, p)| self.fsecond(p) * v * v)
                .collect();
            compensation = s2 * basis.grid_integral(&w);
        }
        let b_next = ScalarField::from_coefficients(
            rhs.coefficients()
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    let alpha = basis.eigenvalue(i);
                    if explicit {
                        z - state.b.coefficients()[i] * (dt * alpha)
                    } else {
                        z / (1.0 + dt * alpha)
                    }
                })
                .collect(),
        );

        let finite = b_next.is_finite() && a_next.as_ref().is_none_or(|a| a.is_finite());
        if !finite {
            return Err(Error::BlowUp {
                step: state.step + 1,
                t: state.t + dt,
                detail: "non-finite Galerkin coefficient".into(),
            });
        }
        let next = self.state(state.t + dt, state.step + 1, a_next, b_next)?;
        Ok((
            next,
            StepTerms {
                dt,
                g1_hs,
                grad_g2_hs: grad_g2,
                compensation,
                martingale,
            },
        ))
    }

    fn fsecond(&self, p: &YosidaPoint) -> f64 {
        if self.physics.potential {
            p.fsecond
        } else {
            0.0
        }
    }

    /// `E_λ(φ, u) = ½‖u‖² + ½‖∇φ‖² + ∫F_λ(φ)`.
    pub fn energy(&self, state: &FieldState) -> f64 {
        self.energy_parts(state).total()
    }

    pub fn energy_parts(&self, state: &FieldState) -> EnergyParts {
        let basis = &*self.basis;
        let kinetic = state.a.as_ref().map_or(0.0, |a| 0.5 * basis.norm_h_sigma(a).powi(2));
        let interface = 0.5 * basis.norm_grad(&state.b).powi(2);
        let potential = if self.physics.potential {
            let f: Vec<f64> = state.pointwise.points.iter().map(|p| p.f).collect();
            basis.grid_integral(&f)
        } else {
            0.0
        };
        EnergyParts {
            kinetic,
            interface,
            potential,
        }
    }

    /// Number of steps needed to reach `t_final`; `t_final` must be a
    /// multiple of `dt`.
    pub fn steps_to(&self, t_final: f64) -> Result<u64> {
        let dt = self.stepper.dt;
        let n = (t_final / dt).round();
        if !(t_final >= 0.0) || (n * dt - t_final).abs() > 1e-9 * dt.max(t_final) {
            return Err(Error::param(
                "t_final",
                format!("final time {t_final} is not a non-negative multiple of dt = {dt}"),
            ));
        }
        Ok(n as u64)
    }

    /// Runs from `initial` to `t_final`, calling every observer on the
    /// initial state and after each step.
    pub fn simulate(
        &self,
        initial: FieldState,
        t_final: f64,
        source: &dyn IncrementSource,
        observers: &mut [&mut dyn Observer],
    ) -> Result<Summary> {
        let steps = self.steps_to(t_final)?;
        let mut state = initial;
        for o in observers.iter_mut() {
            o.observe(self, &state, None)?;
        }
        let mut sup_phase = state.sup_phase();
        let mut excursion = state.excursion_fraction(self.stepper.max_phase_clip);
        for _ in 0..steps {
            let inc = if self.noise.is_off() {
                WienerIncrement::zeros(self.stepper.dt, self.noise.k1(), self.noise.k2())
            } else {
                source.increment(state.step, self.stepper.dt)?
            };
            let (next, terms) = self.step(&state, &inc)?;
            for o in observers.iter_mut() {
                o.observe(self, &next, Some(&terms))?;
            }
            sup_phase = sup_phase.max(next.sup_phase());
            excursion = excursion.max(next.excursion_fraction(self.stepper.max_phase_clip));
            state = next;
        }
        Ok(Summary {
            steps,
            sup_phase,
            max_excursion_fraction: excursion,
            final_state: state,
        })
    }
}

struct Explicit {
    velocity: Option<VectorField>,
    phase: ScalarField,
    max_speed: f64,
}

/// Grid values of the phase and of the pointwise Yosida quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointwise {
    pub phi: Vec<f64>,
    pub points: Vec<YosidaPoint>,
}

/// Galerkin coefficients at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub step: u64,
    pub lambda: f64,
    pub a: Option<VectorField>,
    pub b: ScalarField,
    /// Chemical potential, always consistent with `b`.
    pub c: ScalarField,
    pub pointwise: Pointwise,
}

impl FieldState {
    /// `α b`, the linear part of the chemical potential.
    fn linear_mu(&self, basis: &SpectralBasis) -> ScalarField {
        basis.laplacian(&self.b).scaled(-1.0)
    }

    /// `max |φ|` on the grid.
    pub fn sup_phase(&self) -> f64 {
        self.pointwise.phi.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Fraction of grid points with `|φ| > threshold`.
    pub fn excursion_fraction(&self, threshold: f64) -> f64 {
        let n = self.pointwise.phi.iter().filter(|v| v.abs() > threshold).count();
        n as f64 / self.pointwise.phi.len() as f64
    }
}

/// Deterministic right-hand sides.
#[derive(Debug, Clone)]
pub struct Drift {
    pub velocity: Option<VectorField>,
    pub phase: ScalarField,
}

/// Per-step quantities of the discrete Itô energy balance, evaluated at the
/// old level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepTerms {
    pub dt: f64,
    /// `‖G₁(u)‖²_{HS}`
    pub g1_hs: f64,
    /// `‖∇G₂,λ(φ)‖²_{HS}`
    pub grad_g2_hs: f64,
    /// `Σₖ ∫ F''_λ(φ) (G₂,λ(φ)[u_k])²`
    pub compensation: f64,
    /// `(u, G₁ΔW₁) + (μ, G₂,λΔW₂)`
    pub martingale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub interface: f64,
    pub potential: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.interface + self.potential
    }
}

/// Receives the initial state and every subsequent state of a trajectory.
pub trait Observer {
    fn observe(&mut self, problem: &Problem, state: &FieldState, terms: Option<&StepTerms>) -> Result<()>;
}

/// Keeps every `cadence`-th state (and the last one handed over).
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub cadence: u64,
    pub states: Vec<FieldState>,
}

impl Recorder {
    pub fn every(cadence: u64) -> Self {
        Self {
            cadence: cadence.max(1),
            states: Vec::new(),
        }
    }
}

impl Observer for Recorder {
    fn observe(&mut self, _: &Problem, state: &FieldState, _: Option<&StepTerms>) -> Result<()> {
        if state.step.is_multiple_of(self.cadence.max(1)) {
            self.states.push(state.clone());
        }
        Ok(())
    }
}

/// Outcome of [`Problem::simulate`].
#[derive(Debug, Clone)]
pub struct Summary {
    pub steps: u64,
    pub sup_phase: f64,
    pub max_excursion_fraction: f64,
    pub final_state: FieldState,
}

#[cfg(test)]
mod tests;
