use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{FieldState, Observer, Problem, StepTerms};

/// One row of the energy ledger. Energy parts are instantaneous; every other
/// column is a running sum from the start of the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub step: u64,
    pub t: f64,
    /// `½‖u‖²`
    pub kinetic: f64,
    /// `½‖∇φ‖²`
    pub interface: f64,
    /// `∫F_λ(φ)`
    pub potential: f64,
    /// `Σ dt ‖∇u⁺‖²`
    pub dissipation_velocity: f64,
    /// `Σ dt ‖μ⁺‖²`
    pub dissipation_mu: f64,
    /// `Σ ½dt ‖G₁(u)‖²_{HS}`
    pub noise_g1: f64,
    /// `Σ ½dt ‖∇G₂,λ(φ)‖²_{HS}`
    pub noise_g2: f64,
    /// `Σ ½dt Σₖ∫F''_λ(φ) g_k²`
    pub noise_compensation: f64,
    /// `Σ [(u, G₁ΔW₁) + (μ, G₂,λΔW₂)]`
    pub martingale: f64,
    /// `Σ dt ‖u‖²`, left end point.
    pub int_velocity_sq: f64,
    /// `Σ dt ‖∇φ‖²`, left end point.
    pub int_grad_phase_sq: f64,
}

impl LedgerRecord {
    pub fn energy(&self) -> f64 {
        self.kinetic + self.interface + self.potential
    }

    pub fn dissipation(&self) -> f64 {
        self.dissipation_velocity + self.dissipation_mu
    }

    pub fn noise_input(&self) -> f64 {
        self.noise_g1 + self.noise_g2 + self.noise_compensation
    }

    fn is_finite(&self) -> bool {
        [
            self.t,
            self.kinetic,
            self.interface,
            self.potential,
            self.dissipation_velocity,
            self.dissipation_mu,
            self.noise_g1,
            self.noise_g2,
            self.noise_compensation,
            self.martingale,
            self.int_velocity_sq,
            self.int_grad_phase_sq,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Per-trajectory energy bookkeeping, fed as a [`Observer`].
#[derive(Debug, Clone)]
pub struct EnergyLedger {
    cadence: u64,
    records: Vec<LedgerRecord>,
    latest: Option<LedgerRecord>,
    // ‖u‖² and ‖∇φ‖² of the previous state.
    previous: (f64, f64),
    slack_bound: f64,
}

impl EnergyLedger {
    /// Records every `cadence`-th step; the sums are accumulated at every step
    /// regardless.
    pub fn new(cadence: u64) -> Self {
        Self {
            cadence: cadence.max(1),
            records: Vec::new(),
            latest: None,
            previous: (0.0, 0.0),
            slack_bound: 0.0,
        }
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<LedgerRecord> {
        self.records
    }

    /// The most recent row, recorded or not.
    pub fn latest(&self) -> Option<&LedgerRecord> {
        self.latest.as_ref()
    }

    /// `|O| · c_F² λ / (2(1 − λc_F))`: how far `∫F_λ` may fall below zero.
    pub fn slack_bound(&self) -> f64 {
        self.slack_bound
    }
}

impl Observer for EnergyLedger {
    fn observe(&mut self, problem: &Problem, state: &FieldState, terms: Option<&StepTerms>) -> Result<()> {
        let basis = &*problem.basis;
        let parts = problem.energy_parts(state);
        let u_sq = state.a.as_ref().map_or(0.0, |a| basis.norm_h_sigma(a).powi(2));
        let grad_sq = basis.norm_grad(&state.b).powi(2);
        let mut rec = match (terms, self.latest) {
            (None, _) => {
                self.slack_bound = if problem.physics.potential {
                    basis.area() * problem.layer.negativity_slack(&problem.potential)
                } else {
                    0.0
                };
                LedgerRecord::default()
            }
            (Some(terms), Some(prev)) => {
                let dt = terms.dt;
                let grad_u_sq = state.a.as_ref().map_or(0.0, |a| basis.norm_v_sigma(a).powi(2));
                let mu_sq = basis.norm_h(&state.c).powi(2);
                LedgerRecord {
                    dissipation_velocity: prev.dissipation_velocity + dt * grad_u_sq,
                    dissipation_mu: prev.dissipation_mu + dt * mu_sq,
                    noise_g1: prev.noise_g1 + 0.5 * dt * terms.g1_hs,
                    noise_g2: prev.noise_g2 + 0.5 * dt * terms.grad_g2_hs,
                    noise_compensation: prev.noise_compensation + 0.5 * dt * terms.compensation,
                    martingale: prev.martingale + terms.martingale,
                    int_velocity_sq: prev.int_velocity_sq + dt * self.previous.0,
                    int_grad_phase_sq: prev.int_grad_phase_sq + dt * self.previous.1,
                    ..prev
                }
            }
            (Some(_), None) => {
                return Err(Error::param("ledger", "step terms received before the initial state"));
            }
        };
        rec.step = state.step;
        rec.t = state.t;
        rec.kinetic = parts.kinetic;
        rec.interface = parts.interface;
        rec.potential = parts.potential;
        if !rec.is_finite() {
            return Err(Error::BlowUp {
                step: state.step,
                t: state.t,
                detail: "non-finite energy ledger entry".into(),
            });
        }
        let floor = -(self.slack_bound * (1.0 + 1e-9) + 1e-12);
        if rec.potential < floor {
            return Err(Error::Domain {
                what: "the potential energy lower bound",
                x: rec.potential,
            });
        }
        self.previous = (u_sq, grad_sq);
        self.latest = Some(rec);
        if state.step.is_multiple_of(self.cadence) {
            self.records.push(rec);
        }
        Ok(())
    }
}

/// Defect of the discrete Itô energy balance between two rows:
/// `E(i) + noise input + martingale increment − E(j) − dissipation`.
///
/// For the semi-implicit scheme this is the numerical dissipation of the
/// implicit step plus `O(dt)` splitting errors; exactly zero for `i = j`.
pub fn ito_residual(from: &LedgerRecord, to: &LedgerRecord) -> f64 {
    let noise = to.noise_input() - from.noise_input();
    let martingale = to.martingale - from.martingale;
    let dissipation = to.dissipation() - from.dissipation();
    (from.energy() + noise + martingale) - (to.energy() + dissipation)
}
