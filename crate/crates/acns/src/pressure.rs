//! Pressure recovered a posteriori from a completed trajectory.
//!
//! The stepper only ever sees the Leray-projected momentum equation. The
//! unprojected residual `h` of a step is therefore a pure gradient (up to
//! round-off and its spatial mean), and inverting `∇π = h` in Fourier space
//! gives the pressure of that step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{FieldState, Problem, Scheme};
use crate::noise::{IncrementSource, WienerIncrement};
use crate::spectral::{ScalarField, SpectralBasis, SpectralVector};

/// `h = (u⁺ − u − G₁(u)ΔW₁)/dt + A u* + (u·∇)u − μ∇φ`, without projection.
/// `u*` is `u⁺` for the semi-implicit scheme and `u` for the explicit one;
/// all other terms are at the old level, exactly as in the stepper.
pub fn momentum_residual(
    problem: &Problem,
    from: &FieldState,
    to: &FieldState,
    increment: &WienerIncrement,
) -> Result<SpectralVector> {
    let basis = &*problem.basis;
    let dt = problem.stepper.dt;
    if to.step != from.step + 1 || (to.t - from.t - dt).abs() > 1e-9 * dt.max(to.t.abs()) {
        return Err(Error::param(
            "states",
            format!("steps {} and {} are not consecutive at dt = {dt}", from.step, to.step),
        ));
    }
    if (increment.dt - dt).abs() > 1e-12 * dt {
        return Err(Error::param("increment", format!("increment dt {} differs from {dt}", increment.dt)));
    }
    let (Some(u), Some(u_next)) = (&from.a, &to.a) else {
        return Err(Error::BasisMismatch("pressure recovery needs a velocity field".into()));
    };
    let mut tendency = u_next.sub(u);
    if problem.noise.velocity_active() {
        tendency.add_assign_scaled(-1.0, &problem.noise.apply_g1(basis, u, &increment.dw1)?);
    }
    let implicit = match problem.stepper.scheme {
        Scheme::SemiImplicitEm => u_next,
        Scheme::FullyExplicitEm => u,
    };
    let linear = tendency.scaled(1.0 / dt).axpy(1.0, &basis.stokes(implicit)?);
    let mut h = basis.velocity_components(&linear)?;
    if problem.physics.advection {
        h = h.axpy(1.0, &basis.advect(u, u)?);
    }
    if problem.physics.coupling {
        h = h.axpy(-1.0, &basis.korteweg_unprojected(&from.c, &from.b)?);
    }
    Ok(h)
}

/// Zero-mean `π` with `∇π` the gradient part of `h`:
/// `π̂(k) = −i k·ĥ(k)/|k|²`, `π̂(0) = 0`.
pub fn recover_pressure(basis: &SpectralBasis, h: &SpectralVector) -> ScalarField {
    let i = Complex64::new(0.0, 1.0);
    let coeffs = (0..basis.len())
        .map(|idx| {
            let (kx, ky) = basis.wave_vector(idx);
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 || !basis.is_retained(idx) {
                Complex64::new(0.0, 0.0)
            } else {
                -i * (h.x[idx] * kx + h.y[idx] * ky) / k2
            }
        })
        .collect();
    ScalarField::from_coefficients(coeffs)
}

/// Per-step diagnostics of the recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureStep {
    pub step: u64,
    pub t: f64,
    /// `|∫π| / |O|`
    pub mean: f64,
    /// `max |ĥ − ∇π̂|` over non-zero wave-vectors: what remains of the
    /// unprojected momentum equation once the pressure is added.
    pub closure: f64,
    /// `|∫h| / |O|`, the spatial mean of `h`, which no periodic pressure can
    /// absorb.
    pub mean_force: f64,
    /// `‖π‖_H`
    pub norm: f64,
    /// `‖Πᵐ‖_H` of the time primitive `Πᵐ = Σ_{j≤m} πʲ dt`.
    pub primitive_norm: f64,
}

/// Pressure of every step of a trajectory together with its time primitive.
#[derive(Debug, Clone)]
pub struct PressureSeries {
    pub dt: f64,
    pub steps: Vec<PressureStep>,
    pub pressure: Vec<ScalarField>,
    pub primitive: Vec<ScalarField>,
}

impl PressureSeries {
    pub fn max_closure(&self) -> f64 {
        self.steps.iter().map(|s| s.closure).fold(0.0, f64::max)
    }

    pub fn max_mean(&self) -> f64 {
        self.steps.iter().map(|s| s.mean).fold(0.0, f64::max)
    }

    /// `max_m ‖Πᵐ‖_H`, the proxy for the `W^{−1,∞}(0,T;H)` norm.
    pub fn primitive_sup(&self) -> f64 {
        self.steps.iter().map(|s| s.primitive_norm).fold(0.0, f64::max)
    }
}

/// Pressure along consecutive states `states[0], states[1], …`; the
/// increments are drawn again from `source`.
pub fn pressure_series(
    problem: &Problem,
    states: &[FieldState],
    source: &dyn IncrementSource,
) -> Result<PressureSeries> {
    let basis = &*problem.basis;
    let dt = problem.stepper.dt;
    let mut series = PressureSeries {
        dt,
        steps: Vec::with_capacity(states.len().saturating_sub(1)),
        pressure: Vec::new(),
        primitive: Vec::new(),
    };
    let mut primitive = ScalarField::zeros(basis.len());
    for w in states.windows(2) {
        let inc = if problem.noise.is_off() {
            WienerIncrement::zeros(dt, problem.noise.k1(), problem.noise.k2())
        } else {
            source.increment(w[0].step, dt)?
        };
        let h = momentum_residual(problem, &w[0], &w[1], &inc)?;
        let pi = recover_pressure(basis, &h);
        let grad = basis.gradient(&pi);
        let closure = (1..basis.len())
            .map(|i| (h.x[i] - grad.x[i]).norm().max((h.y[i] - grad.y[i]).norm()))
            .fold(0.0, f64::max);
        let area = basis.area();
        let mean_of = |c: &[Complex64]| basis.grid_integral(&basis.to_physical(c)) / area;
        primitive.add_assign_scaled(dt, &pi);
        series.steps.push(PressureStep {
            step: w[0].step,
            t: w[0].t,
            mean: mean_of(pi.coefficients()).abs(),
            closure,
            mean_force: mean_of(&h.x).hypot(mean_of(&h.y)),
            norm: basis.norm_h(&pi),
            primitive_norm: basis.norm_h(&primitive),
        });
        series.pressure.push(pi);
        series.primitive.push(primitive.clone());
    }
    Ok(series)
}

/// Left-hand side of the pressure estimate and the trajectory statistics on
/// its right-hand side, all pathwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureNormReport {
    /// `max_m ‖Πᵐ‖_H`
    pub primitive_sup: f64,
    /// `sup_t ‖u‖_{H_σ}`
    pub velocity_sup: f64,
    /// `(∫‖∇u‖²)^{1/2}`
    pub velocity_l2v: f64,
    /// `∫‖φ‖²_{V₂}`
    pub phase_l2v2_sq: f64,
    /// `∫‖F'_λ(φ)‖²`
    pub fprime_l2h_sq: f64,
    /// `1 + sup‖u‖ + ‖u‖_{L²V} + ‖u‖²_{L²V} + ‖φ‖²_{L²V₂} + ‖F'_λ(φ)‖²_{L²H}`
    pub rhs_factors: f64,
    pub ratio: f64,
}

/// Evaluates [`PressureNormReport`] with left-point time integrals over the
/// states the series was built from.
pub fn pressure_norm_report(problem: &Problem, series: &PressureSeries, states: &[FieldState]) -> PressureNormReport {
    let basis = &*problem.basis;
    let dt = series.dt;
    let (mut sup_u, mut int_v, mut int_v2, mut int_fp) = (0.0f64, 0.0, 0.0, 0.0);
    for (i, s) in states.iter().enumerate() {
        sup_u = sup_u.max(s.a.as_ref().map_or(0.0, |a| basis.norm_h_sigma(a)));
        if i + 1 < states.len() {
            int_v += dt * s.a.as_ref().map_or(0.0, |a| basis.norm_v_sigma(a).powi(2));
            int_v2 += dt * basis.norm_v2(&s.b).powi(2);
            let fp: Vec<f64> = s.pointwise.points.iter().map(|p| p.fprime * p.fprime).collect();
            int_fp += dt * basis.grid_integral(&fp);
        }
    }
    let rhs = 1.0 + sup_u + int_v.sqrt() + int_v + int_v2 + int_fp;
    let lhs = series.primitive_sup();
    PressureNormReport {
        primitive_sup: lhs,
        velocity_sup: sup_u,
        velocity_l2v: int_v.sqrt(),
        phase_l2v2_sq: int_v2,
        fprime_l2h_sq: int_fp,
        rhs_factors: rhs,
        ratio: lhs / rhs,
    }
}
