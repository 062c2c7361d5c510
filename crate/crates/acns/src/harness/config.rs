use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::ConvergenceKind;
use crate::error::{Error, Result};
use crate::galerkin::{Physics, Problem, Scheme, StepperConfig};
use crate::noise::{NoiseModel, NoiseSpec};
use crate::potential::{PotentialSpec, YosidaLayer};
use crate::spectral::{BasisConfig, BoundaryMode, SpectralBasis};

/// Complete description of a run, read from a TOML file. Unknown keys are
/// rejected at every level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub regularization: RegularizationConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub stepper: StepperSection,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub observers: ObserverConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dependence: Option<DependenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub n: usize,
    pub length: f64,
    pub boundary: BoundaryMode,
    pub dealias_fraction: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            n: 64,
            length: 2.0 * std::f64::consts::PI,
            boundary: BoundaryMode::Periodic,
            dealias_fraction: 2.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub theta: f64,
    pub theta0: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { theta: 1.0, theta0: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizationConfig {
    pub lambda: f64,
    pub root_tolerance: f64,
    pub quadrature_order: usize,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            root_tolerance: 1e-12,
            quadrature_order: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperSection {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub max_phase_clip: f64,
    pub cfl_guard: bool,
}

impl Default for StepperSection {
    fn default() -> Self {
        let s = StepperConfig::default();
        Self {
            dt: s.dt,
            t_final: 0.1,
            scheme: s.scheme,
            max_phase_clip: s.max_phase_clip,
            cfl_guard: s.cfl_guard,
        }
    }
}

impl StepperSection {
    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            scheme: self.scheme,
            max_phase_clip: self.max_phase_clip,
            cfl_guard: self.cfl_guard,
        }
    }
}

/// Initial data: a named preset or a snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Disc of phase `+amplitude` in a sea of `−amplitude`, with a `tanh`
    /// interface, optionally stirred by a Taylor–Green vortex.
    Bubble {
        #[serde(default = "defaults::radius")]
        radius: f64,
        #[serde(default = "defaults::width")]
        width: f64,
        #[serde(default = "defaults::amplitude")]
        amplitude: f64,
        #[serde(default = "defaults::swirl")]
        swirl: f64,
    },
    /// Random trigonometric phase on the shell `k_min ≤ |k| L/2π ≤ k_max`,
    /// scaled so that `|φ| ≤ peak` everywhere, and a random solenoidal
    /// velocity with root-mean-square speed `speed`. The datum does not
    /// depend on the grid size.
    RandomBand {
        #[serde(default)]
        seed: u64,
        #[serde(default = "defaults::k_min")]
        k_min: f64,
        #[serde(default = "defaults::k_max")]
        k_max: f64,
        #[serde(default = "defaults::peak")]
        peak: f64,
        #[serde(default = "defaults::speed")]
        speed: f64,
    },
    /// `φ ≡ 1` minus a Gaussian dip of depth `defect` (zero gives the pure
    /// phase), at rest.
    PurePhase {
        #[serde(default)]
        defect: f64,
        #[serde(default = "defaults::width")]
        defect_width: f64,
    },
    /// End-of-run snapshot of an earlier trajectory.
    Snapshot { path: PathBuf },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Bubble {
            radius: defaults::radius(),
            width: defaults::width(),
            amplitude: defaults::amplitude(),
            swirl: defaults::swirl(),
        }
    }
}

mod defaults {
    pub fn radius() -> f64 {
        1.2
    }
    pub fn width() -> f64 {
        0.3
    }
    pub fn amplitude() -> f64 {
        0.95
    }
    pub fn swirl() -> f64 {
        0.5
    }
    pub fn k_min() -> f64 {
        1.0
    }
    pub fn k_max() -> f64 {
        4.0
    }
    pub fn peak() -> f64 {
        0.8
    }
    pub fn speed() -> f64 {
        0.5
    }
    pub fn level() -> f64 {
        50.0
    }
    pub fn perturbation_amplitude() -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverConfig {
    /// Ledger rows and term-table times are kept every `cadence` steps.
    pub cadence: u64,
    /// Snapshots every `snapshot_cadence` steps; `0` writes only the first
    /// and the last state.
    pub snapshot_cadence: u64,
    pub plots: bool,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            cadence: 10,
            snapshot_cadence: 0,
            plots: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub members: usize,
    pub base_seed: u64,
    /// Worker threads; `0` lets the pool decide. Overridden by the
    /// `ACNS_WORKERS` environment variable.
    pub workers: usize,
    /// Seeds for the dt-versus-dt/2 bias estimate of the inequality check.
    pub bias_seeds: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            members: 64,
            base_seed: 0,
            workers: 0,
            bias_seeds: 4,
        }
    }
}

/// Second initial datum of a paired-path experiment: the first one displaced
/// along a random band-limited direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub seed: u64,
    #[serde(default = "defaults::perturbation_amplitude")]
    pub velocity: f64,
    #[serde(default = "defaults::perturbation_amplitude")]
    pub phase: f64,
    #[serde(default = "defaults::k_max")]
    pub k_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependenceSection {
    #[serde(default = "defaults::level")]
    pub level: f64,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub kind: ConvergenceKind,
    pub ladder: Vec<f64>,
    #[serde(default = "ConvergenceSection::default_seeds")]
    pub seeds: Vec<u64>,
}

impl ConvergenceSection {
    fn default_seeds() -> Vec<u64> {
        vec![0, 1, 2]
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // Snapshot paths are relative to the configuration file.
        if let InitialSpec::Snapshot { path: p } = &mut cfg.initial {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn basis_config(&self) -> BasisConfig {
        let d = &self.domain;
        BasisConfig {
            n: d.n,
            length: d.length,
            boundary: d.boundary,
            dealias_fraction: d.dealias_fraction,
            velocity_coupling: d.boundary == BoundaryMode::Periodic,
        }
    }

    pub fn basis(&self) -> Result<Arc<SpectralBasis>> {
        Ok(Arc::new(SpectralBasis::new(self.basis_config())?))
    }

    /// The problem of member `seed`; checks every module's preconditions.
    pub fn problem_on(&self, basis: Arc<SpectralBasis>, seed: u64) -> Result<Problem> {
        let potential = PotentialSpec::new(self.potential.theta, self.potential.theta0)?;
        let r = &self.regularization;
        let layer = YosidaLayer::with_settings(r.lambda, r.root_tolerance, r.quadrature_order)?;
        let noise = NoiseModel::new(&basis, NoiseSpec { seed, ..self.noise.clone() })?;
        Ok(Problem::new(basis, potential, layer, noise, self.stepper.stepper())?.with_physics(self.physics))
    }

    pub fn problem(&self, seed: u64) -> Result<Problem> {
        self.problem_on(self.basis()?, seed)
    }

    /// Validation beyond what the individual constructors check.
    pub fn validate(&self) -> Result<()> {
        let problem = self.problem(self.noise.seed)?;
        problem.steps_to(self.stepper.t_final)?;
        super::initial::initial_state(self, &problem)?;
        if self.observers.cadence == 0 {
            return Err(Error::Config("observers.cadence must be at least 1".into()));
        }
        if self.ensemble.members == 0 {
            return Err(Error::Config("ensemble.members must be at least 1".into()));
        }
        if let Some(dep) = &self.dependence {
            if !(dep.level > 0.0) {
                return Err(Error::Config("dependence.level must be positive".into()));
            }
            if dep.epsilons.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
                return Err(Error::Config("dependence.epsilons must be finite and non-negative".into()));
            }
        }
        if let Some(conv) = &self.convergence {
            if conv.ladder.len() < 2 {
                return Err(Error::Config("convergence.ladder needs at least two rungs".into()));
            }
            if conv.seeds.is_empty() {
                return Err(Error::Config("convergence.seeds must not be empty".into()));
            }
        }
        Ok(())
    }
}
