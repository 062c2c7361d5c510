use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{InitialSpec, PerturbationSpec, RunConfig};
use crate::diagnostics::Perturbation;
use crate::error::{Error, Result};
use crate::galerkin::{FieldState, Problem};
use crate::spectral::snapshot::Snapshot;
use crate::spectral::{BoundaryMode, ScalarField, SpectralBasis, VectorField};

/// Builds the initial state described by `cfg.initial` on the basis of
/// `problem`.
pub fn initial_state(cfg: &RunConfig, problem: &Problem) -> Result<FieldState> {
    let basis = &*problem.basis;
    let velocity = basis.has_velocity();
    let zero_u = || velocity.then(|| VectorField::zeros(basis.len()));
    let l = basis.length();
    let (a, b) = match &cfg.initial {
        InitialSpec::Bubble {
            radius,
            width,
            amplitude,
            swirl,
        } => {
            check_positive("initial.radius", *radius)?;
            check_positive("initial.width", *width)?;
            check_unit("initial.amplitude", *amplitude)?;
            let c = 0.5 * l;
            let b = basis.project_scalar(|x, y| {
                let r = (x - c).hypot(y - c);
                -amplitude * ((r - radius) / (std::f64::consts::SQRT_2 * width)).tanh()
            });
            let a = if velocity && *swirl != 0.0 {
                let k = 2.0 * std::f64::consts::PI / l;
                Some(basis.project_vector(|x, y| {
                    (
                        swirl * (k * x).sin() * (k * y).cos(),
                        -swirl * (k * x).cos() * (k * y).sin(),
                    )
                })?)
            } else {
                zero_u()
            };
            (a, b)
        }
        InitialSpec::RandomBand {
            seed,
            k_min,
            k_max,
            peak,
            speed,
        } => {
            if !(*k_min >= 0.0 && k_max >= k_min) {
                return Err(Error::Config("initial: need 0 ≤ k_min ≤ k_max".into()));
            }
            check_unit("initial.peak", *peak)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let phase = Modes::draw(&mut rng, basis, *k_min, *k_max);
            if phase.terms.is_empty() {
                return Err(Error::Config("initial: the wavenumber band is empty".into()));
            }
            let b = phase.scalar(basis, peak / phase.amplitude_sum());
            let a = if velocity {
                let stream = Modes::draw(&mut rng, basis, k_min.max(1.0), *k_max);
                let rms = stream.velocity_rms();
                Some(stream.velocity(basis, if rms > 0.0 { speed / rms } else { 0.0 })?)
            } else {
                None
            };
            (a, b)
        }
        InitialSpec::PurePhase { defect, defect_width } => {
            check_positive("initial.defect_width", *defect_width)?;
            if !(0.0..=2.0).contains(defect) {
                return Err(Error::Config("initial.defect must lie in [0, 2]".into()));
            }
            let c = 0.5 * l;
            let b = if *defect == 0.0 {
                basis.project_scalar(|_, _| 1.0)
            } else {
                basis.project_scalar(|x, y| {
                    let r2 = (x - c).powi(2) + (y - c).powi(2);
                    1.0 - defect * (-r2 / (2.0 * defect_width * defect_width)).exp()
                })
            };
            (zero_u(), b)
        }
        InitialSpec::Snapshot { path } => {
            let snap = Snapshot::load(path)?;
            let (a, b, _) = snap.to_fields(basis)?;
            (a, b)
        }
    };
    problem.initial_state(a, b)
}

/// Direction of the second initial datum of a paired-path experiment.
pub fn perturbation(spec: &PerturbationSpec, basis: &SpectralBasis) -> Result<Perturbation> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phase = Modes::draw(&mut rng, basis, 1.0, spec.k_max).scalar(basis, spec.phase);
    let velocity = if basis.has_velocity() {
        Some(Modes::draw(&mut rng, basis, 1.0, spec.k_max).velocity(basis, spec.velocity)?)
    } else {
        None
    };
    Ok(Perturbation { velocity, phase })
}

/// Random trigonometric polynomial with standard normal amplitudes on the
/// shell `k_min ≤ |k| L/2π ≤ k_max`.
///
/// The modes are enumerated by integer wave index, not by basis entry, and
/// the field is evaluated analytically before projection. The same seed
/// therefore gives the same function at every resolution.
struct Modes {
    periodic: bool,
    /// `(kx, ky, a, b)` with physical wave-vector `(kx, ky)`.
    terms: Vec<(f64, f64, f64, f64)>,
}

impl Modes {
    fn draw(rng: &mut ChaCha8Rng, basis: &SpectralBasis, k_min: f64, k_max: f64) -> Self {
        let periodic = basis.boundary() == BoundaryMode::Periodic;
        let l = basis.length();
        let in_band = |k: f64| k >= k_min - 1e-12 && k <= k_max + 1e-12;
        let mut terms = Vec::new();
        let reach = k_max.ceil() as i64;
        if periodic {
            let unit = 2.0 * PI / l;
            for jy in 0..=reach {
                for jx in -reach..=reach {
                    let upper = jy > 0 || jx >= 0;
                    if !upper || !in_band((jx as f64).hypot(jy as f64)) {
                        continue;
                    }
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = if jx == 0 && jy == 0 { 0.0 } else { rng.sample(StandardNormal) };
                    terms.push((unit * jx as f64, unit * jy as f64, a, b));
                }
            }
        } else {
            // Cosine modes cos(jx π x/L) cos(jy π y/L) have |k| L/2π = |j|/2.
            let unit = PI / l;
            for jy in 0..=2 * reach {
                for jx in 0..=2 * reach {
                    if in_band(0.5 * (jx as f64).hypot(jy as f64)) {
                        let a: f64 = rng.sample(StandardNormal);
                        terms.push((unit * jx as f64, unit * jy as f64, a, 0.0));
                    }
                }
            }
        }
        Self { periodic, terms }
    }

    /// Upper bound of the sup norm of the polynomial.
    fn amplitude_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.2.abs() + t.3.abs()).sum()
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(kx, ky, a, b)| {
                if self.periodic {
                    let th = kx * x + ky * y;
                    a * th.cos() + b * th.sin()
                } else {
                    a * (kx * x).cos() * (ky * y).cos()
                }
            })
            .sum()
    }

    fn scalar(&self, basis: &SpectralBasis, scale: f64) -> ScalarField {
        basis.project_scalar(|x, y| scale * self.value(x, y))
    }

    /// Root-mean-square speed of `∇^⊥ψ` for the polynomial `ψ`.
    fn velocity_rms(&self) -> f64 {
        let mean_sq: f64 = self
            .terms
            .iter()
            .map(|&(kx, ky, a, b)| 0.5 * (kx * kx + ky * ky) * (a * a + b * b))
            .sum();
        mean_sq.sqrt()
    }

    /// `scale · (∂_y ψ, −∂_x ψ)` on the torus.
    fn velocity(&self, basis: &SpectralBasis, scale: f64) -> Result<VectorField> {
        basis.project_vector(|x, y| {
            self.terms.iter().fold((0.0, 0.0), |(ux, uy), &(kx, ky, a, b)| {
                let th = kx * x + ky * y;
                let d = b * th.cos() - a * th.sin();
                (ux + scale * ky * d, uy - scale * kx * d)
            })
        })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}
