//! Truncated Wiener processes and the diffusion operators `G₁`, `G₂`, `G₂,λ`.
//!
//! Velocity noise acts along the first `K₁` real Stokes eigenfunctions `ê_k`
//! (sorted by eigenvalue) with amplitudes `σ₁ₖ`. Phase noise has `K₂`
//! Brownian components, and component `k` enters through the multiplier
//! `g_k(x) = σ₂ₖ(1 − x²)` evaluated pointwise on the grid, so
//! `G₂(φ)[u_k] = g_k(φ)`. In the regularized system the argument is `J_λ(φ)`.
//!
//! Increments are counter based: step `m` draws the `W₁` block from ChaCha8
//! stream `2m` and the `W₂` block from stream `2m + 1` of the member seed,
//! modes in order. A step can therefore be regenerated in isolation, and the
//! result does not depend on how members are scheduled.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{PotentialSpec, YosidaLayer};
use crate::spectral::snapshot::{Header, IncrementRecord};
use crate::spectral::{ScalarField, SpectralBasis, VectorField};

/// Structure of the velocity noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum G1Kind {
    /// `G₁(u)[u¹ₖ] = σ₁ₖ ê_k`
    #[default]
    Additive,
    /// `G₁(u)[u¹ₖ] = σ₁ₖ (1 + κ (u, ê_k)) ê_k`
    DiagonalMultiplicative,
}

/// User-facing description of the noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub seed: u64,
    pub k1: usize,
    pub k2: usize,
    /// Decay exponent `r` in `σ_k = amplitude · k^{−r}`.
    pub decay: f64,
    pub amplitude1: f64,
    pub amplitude2: f64,
    pub g1_kind: G1Kind,
    pub kappa: f64,
    /// Explicit amplitudes; override `amplitude1`/`decay` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<Vec<f64>>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            k1: 8,
            k2: 4,
            decay: 2.0,
            amplitude1: 0.5,
            amplitude2: 0.5,
            g1_kind: G1Kind::Additive,
            kappa: 0.0,
            sigma1: None,
            sigma2: None,
        }
    }
}

impl NoiseSpec {
    /// No noise at all (amplitudes zero).
    pub fn off() -> Self {
        Self {
            amplitude1: 0.0,
            amplitude2: 0.0,
            ..Self::default()
        }
    }

    fn amplitudes(explicit: &Option<Vec<f64>>, count: usize, amplitude: f64, decay: f64) -> Result<Vec<f64>> {
        let sigma = match explicit {
            Some(v) => {
                if v.len() != count {
                    return Err(Error::ModeMismatch {
                        expected: count,
                        got: v.len(),
                    });
                }
                v.clone()
            }
            None => (1..=count).map(|k| amplitude * (k as f64).powf(-decay)).collect(),
        };
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::param("sigma", "amplitudes must be finite"));
        }
        Ok(sigma)
    }
}

/// One Wiener increment over a time step.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub dt: f64,
    pub dw1: Vec<f64>,
    pub dw2: Vec<f64>,
}

impl WienerIncrement {
    pub fn zeros(dt: f64, k1: usize, k2: usize) -> Self {
        Self {
            dt,
            dw1: vec![0.0; k1],
            dw2: vec![0.0; k2],
        }
    }

    pub fn to_record(&self, header: Header) -> IncrementRecord {
        IncrementRecord {
            header,
            dt: self.dt,
            dw1: self.dw1.clone(),
            dw2: self.dw2.clone(),
        }
    }
}

/// Anything that can hand out the Wiener increment of a given step.
pub trait IncrementSource: Sync {
    fn increment(&self, step: u64, dt: f64) -> Result<WienerIncrement>;
}

/// Standard normal draws of one block (`which` 0 for `W₁`, 1 for `W₂`).
fn unit_normals(seed: u64, step: u64, which: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * step + which);
    rng.set_word_pos(0);
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// Sparse real Stokes mode: at most two non-zero coefficients.
#[derive(Debug, Clone)]
struct SparseMode {
    entries: Vec<(usize, Complex64)>,
}

/// The realized noise: amplitudes, mode families and seed.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    spec: NoiseSpec,
    sigma1: Vec<f64>,
    sigma2: Vec<f64>,
    modes1: Vec<SparseMode>,
    grid_len: usize,
}

impl NoiseModel {
    pub fn new(basis: &SpectralBasis, spec: NoiseSpec) -> Result<Self> {
        if spec.kappa < 0.0 || !spec.kappa.is_finite() {
            return Err(Error::param("kappa", "must be a non-negative number"));
        }
        if !spec.decay.is_finite() || spec.decay < 0.0 {
            return Err(Error::param("decay", "must be a non-negative number"));
        }
        let sigma1 = NoiseSpec::amplitudes(&spec.sigma1, spec.k1, spec.amplitude1, spec.decay)?;
        let sigma2 = NoiseSpec::amplitudes(&spec.sigma2, spec.k2, spec.amplitude2, spec.decay)?;
        let modes1 = if basis.has_velocity() {
            let available = basis.stokes_modes().len();
            if spec.k1 > available {
                return Err(Error::param(
                    "k1",
                    format!("{} velocity noise modes requested, basis has {available}", spec.k1),
                ));
            }
            basis.stokes_modes()[..spec.k1]
                .iter()
                .map(|m| {
                    let e = basis.stokes_mode(m)?;
                    Ok(SparseMode {
                        entries: e
                            .coefficients()
                            .iter()
                            .enumerate()
                            .filter(|(_, z)| z.norm() > 0.0)
                            .map(|(i, z)| (i, *z))
                            .collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            spec,
            sigma1,
            sigma2,
            modes1,
            grid_len: basis.len(),
        })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    /// Same model with another seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut m = self.clone();
        m.spec.seed = seed;
        m
    }

    pub fn k1(&self) -> usize {
        self.sigma1.len()
    }

    pub fn k2(&self) -> usize {
        self.sigma2.len()
    }

    pub fn sigma1(&self) -> &[f64] {
        &self.sigma1
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    /// `Σ σ₁ₖ²`
    pub fn s1(&self) -> f64 {
        self.sigma1.iter().map(|s| s * s).sum()
    }

    /// `Σ σ₂ₖ²`
    pub fn s2(&self) -> f64 {
        self.sigma2.iter().map(|s| s * s).sum()
    }

    pub fn velocity_active(&self) -> bool {
        !self.modes1.is_empty() && self.s1() > 0.0
    }

    pub fn phase_active(&self) -> bool {
        self.s2() > 0.0
    }

    pub fn is_off(&self) -> bool {
        !self.velocity_active() && !self.phase_active()
    }

    fn kappa(&self) -> f64 {
        match self.spec.g1_kind {
            G1Kind::Additive => 0.0,
            G1Kind::DiagonalMultiplicative => self.spec.kappa,
        }
    }

    /// Growth constant `C_{G₁}` in `‖G₁(v)‖_{HS}² ≤ 2C²(1 + ‖v‖²)`.
    pub fn c_g1(&self) -> f64 {
        let max_sigma = self.sigma1.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        self.s1().sqrt().max(self.kappa() * max_sigma)
    }

    /// Lipschitz constant `L₁ = κ·max σ₁ₖ` of `G₁`.
    pub fn l1(&self) -> f64 {
        self.kappa() * self.sigma1.iter().fold(0.0f64, |a, s| a.max(s.abs()))
    }

    /// `L₂² = Σ σ₂ₖ² (‖1−x²‖²_{W^{1,∞}} + ‖F''·(1−x²)²‖_{L^∞})`, closed form:
    /// `‖1−x²‖_{W^{1,∞}} = 2` and the second term is
    /// `max(θ²/(4θ₀), θ₀ − θ)`.
    pub fn l2_squared(&self, potential: &PotentialSpec) -> f64 {
        let (theta, theta0) = (potential.theta(), potential.theta0());
        let compensation = (theta * theta / (4.0 * theta0)).max(theta0 - theta);
        self.s2() * (4.0 + compensation)
    }

    pub fn l2(&self, potential: &PotentialSpec) -> f64 {
        self.l2_squared(potential).sqrt()
    }

    /// Gaussian increments of step `step`, a deterministic function of
    /// `(seed, step, mode)`.
    pub fn sample_increment(&self, dt: f64, step: u64) -> Result<WienerIncrement> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let s = dt.sqrt();
        let mut dw1 = unit_normals(self.spec.seed, step, 0, self.k1());
        let mut dw2 = unit_normals(self.spec.seed, step, 1, self.k2());
        dw1.iter_mut().chain(dw2.iter_mut()).for_each(|z| *z *= s);
        Ok(WienerIncrement { dt, dw1, dw2 })
    }

    fn check_increment(&self, dw1: Option<&[f64]>, dw2: Option<&[f64]>) -> Result<()> {
        if let Some(d) = dw1 {
            if d.len() != self.k1() {
                return Err(Error::ModeMismatch {
                    expected: self.k1(),
                    got: d.len(),
                });
            }
        }
        if let Some(d) = dw2 {
            if d.len() != self.k2() {
                return Err(Error::ModeMismatch {
                    expected: self.k2(),
                    got: d.len(),
                });
            }
        }
        Ok(())
    }

    /// `(u, ê_k)` for every noise mode.
    fn projections(&self, basis: &SpectralBasis, u: &VectorField) -> Vec<f64> {
        let c = u.coefficients();
        self.modes1
            .iter()
            .map(|m| basis.measure() * m.entries.iter().map(|(i, e)| (c[*i].conj() * e).re).sum::<f64>())
            .collect()
    }

    /// Coefficient `σ₁ₖ (1 + κ (u, ê_k))` of `G₁(u)[u¹ₖ]` along `ê_k`.
    fn g1_weights(&self, basis: &SpectralBasis, u: &VectorField) -> Vec<f64> {
        let kappa = self.kappa();
        if kappa == 0.0 {
            return self.sigma1.clone();
        }
        self.projections(basis, u)
            .into_iter()
            .zip(&self.sigma1)
            .map(|(p, s)| s * (1.0 + kappa * p))
            .collect()
    }

    /// `Σₖ G₁(u)[u¹ₖ] dW₁ₖ`, already inside the Galerkin space.
    pub fn apply_g1(&self, basis: &SpectralBasis, u: &VectorField, dw1: &[f64]) -> Result<VectorField> {
        self.check_increment(Some(dw1), None)?;
        if u.len() != self.grid_len {
            return Err(Error::BasisMismatch("velocity does not belong to the noise basis".into()));
        }
        let mut out = VectorField::zeros(self.grid_len);
        let coeffs = out.coefficients_mut();
        for ((mode, w), dw) in self.modes1.iter().zip(self.g1_weights(basis, u)).zip(dw1) {
            for (i, e) in &mode.entries {
                coeffs[*i] += e * (w * dw);
            }
        }
        Ok(out)
    }

    /// `‖G₁(u)‖²_{L²(U₁, H_σ)} = Σₖ σ₁ₖ² (1 + κ (u, ê_k))²`.
    pub fn g1_hs_squared(&self, basis: &SpectralBasis, u: &VectorField) -> f64 {
        if self.modes1.is_empty() {
            return 0.0;
        }
        self.g1_weights(basis, u).iter().map(|w| w * w).sum()
    }

    /// Projection of `1 − v²` for grid values `v` already inside `[−1, 1]`.
    /// Every `G₂` image is a multiple of this profile.
    pub fn g2_profile(basis: &SpectralBasis, values: &[f64]) -> ScalarField {
        let g: Vec<f64> = values.iter().map(|v| 1.0 - v * v).collect();
        basis.scalar_from_physical(&g)
    }

    /// `Σₖ σ₂ₖ dW₂ₖ`: the common Brownian factor of every `G₂` increment.
    pub fn g2_factor(&self, dw2: &[f64]) -> Result<f64> {
        self.check_increment(None, Some(dw2))?;
        Ok(self.sigma2.iter().zip(dw2).map(|(s, d)| s * d).sum())
    }

    /// Unregularized `Σₖ g_k(φ) dW₂ₖ`, with `φ` clipped to `[−1, 1]` before
    /// `g_k` is applied.
    pub fn apply_g2(&self, basis: &SpectralBasis, phi: &ScalarField, dw2: &[f64]) -> Result<ScalarField> {
        let factor = self.g2_factor(dw2)?;
        let values: Vec<f64> = basis.scalar_to_physical(phi).iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        Ok(Self::g2_profile(basis, &values).scaled(factor))
    }

    /// `Σₖ g_k(J_λ(φ)) dW₂ₖ`, evaluated pointwise on the grid.
    pub fn apply_g2_lambda(
        &self,
        basis: &SpectralBasis,
        layer: &YosidaLayer,
        potential: &PotentialSpec,
        phi: &ScalarField,
        dw2: &[f64],
    ) -> Result<ScalarField> {
        let factor = self.g2_factor(dw2)?;
        let j = basis
            .scalar_to_physical(phi)
            .iter()
            .map(|&x| layer.resolvent_j(potential, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::g2_profile(basis, &j).scaled(factor))
    }

    /// `‖G₂,λ(φ)‖²_{HS}`
    pub fn g2_hs_squared(
        &self,
        basis: &SpectralBasis,
        layer: &YosidaLayer,
        potential: &PotentialSpec,
        phi: &ScalarField,
    ) -> Result<f64> {
        let ones = vec![1.0; self.k2()];
        let unit = self.apply_g2_lambda(basis, layer, potential, phi, &ones)?;
        let factor = self.g2_factor(&ones)?;
        if factor == 0.0 {
            return Ok(0.0);
        }
        Ok(self.s2() * basis.norm_h(&unit.scaled(1.0 / factor)).powi(2))
    }

    /// Hilbert–Schmidt quantities entering the energy balance, each with its
    /// a-priori bound.
    pub fn hs_norms(
        &self,
        basis: &SpectralBasis,
        layer: &YosidaLayer,
        potential: &PotentialSpec,
        phi: &ScalarField,
        u: Option<&VectorField>,
    ) -> Result<HsNorms> {
        let values = basis.scalar_to_physical(phi);
        let points = layer.points(potential, &values)?;
        let j: Vec<f64> = points.iter().map(|p| p.resolvent).collect();
        let profile = Self::g2_profile(basis, &j);
        let s2 = self.s2();
        let l2sq = self.l2_squared(potential);
        let weight: Vec<f64> = points
            .iter()
            .map(|p| p.fsecond.abs() * (1.0 - p.resolvent * p.resolvent).powi(2))
            .collect();
        let (g1, g1_bound) = match u {
            Some(u) => (
                self.g1_hs_squared(basis, u),
                2.0 * self.c_g1().powi(2) * (1.0 + basis.norm_h_sigma(u).powi(2)),
            ),
            None => (0.0, 0.0),
        };
        Ok(HsNorms {
            g1,
            g1_bound,
            grad_g2: s2 * basis.norm_grad(&profile).powi(2),
            grad_g2_bound: l2sq * basis.norm_grad(phi).powi(2),
            compensation: s2 * basis.grid_integral(&weight),
            compensation_bound: basis.area() * l2sq * (1.0 + 2.0 * potential.c_f()),
        })
    }
}

impl IncrementSource for NoiseModel {
    fn increment(&self, step: u64, dt: f64) -> Result<WienerIncrement> {
        self.sample_increment(dt, step)
    }
}

/// `‖G₁(u)‖²`, `‖∇G₂,λ(φ)‖²` and `Σₖ∫|F''_λ(φ)| g_k(J_λφ)²`, with bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsNorms {
    pub g1: f64,
    pub g1_bound: f64,
    pub grad_g2: f64,
    pub grad_g2_bound: f64,
    pub compensation: f64,
    pub compensation_bound: f64,
}

impl HsNorms {
    pub fn within_bounds(&self) -> bool {
        self.g1 <= self.g1_bound * (1.0 + 1e-12)
            && self.grad_g2 <= self.grad_g2_bound * (1.0 + 1e-12)
            && self.compensation <= self.compensation_bound * (1.0 + 1e-12)
    }
}

/// A fixed Brownian path sampled on a fine step `dt_fine`; increments over
/// any integer multiple of `dt_fine` are sums of fine increments, so runs at
/// different step sizes see the same path.
#[derive(Debug, Clone)]
pub struct WienerPath {
    model: NoiseModel,
    dt_fine: f64,
}

impl WienerPath {
    pub fn new(model: &NoiseModel, dt_fine: f64) -> Result<Self> {
        if !(dt_fine > 0.0 && dt_fine.is_finite()) {
            return Err(Error::param("dt_fine", "must be positive"));
        }
        Ok(Self {
            model: model.clone(),
            dt_fine,
        })
    }

    pub fn dt_fine(&self) -> f64 {
        self.dt_fine
    }

    /// Number of fine steps per coarse step of size `dt`.
    pub fn ratio(&self, dt: f64) -> Result<u64> {
        let r = (dt / self.dt_fine).round();
        if r < 1.0 || ((r * self.dt_fine) - dt).abs() > 1e-9 * dt {
            return Err(Error::param(
                "dt",
                format!("{dt} is not an integer multiple of the path resolution {}", self.dt_fine),
            ));
        }
        Ok(r as u64)
    }
}

impl IncrementSource for WienerPath {
    fn increment(&self, step: u64, dt: f64) -> Result<WienerIncrement> {
        let r = self.ratio(dt)?;
        let mut acc = WienerIncrement::zeros(dt, self.model.k1(), self.model.k2());
        for j in 0..r {
            let fine = self.model.sample_increment(self.dt_fine, step * r + j)?;
            for (a, b) in acc.dw1.iter_mut().zip(&fine.dw1) {
                *a += b;
            }
            for (a, b) in acc.dw2.iter_mut().zip(&fine.dw2) {
                *a += b;
            }
        }
        Ok(acc)
    }
}
