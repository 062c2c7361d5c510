use serde::{Deserialize, Serialize};

use super::ledger::{EnergyLedger, LedgerRecord};
use super::mean_and_se;
use crate::error::{Error, Result};
use crate::galerkin::{FieldState, Problem, StepperConfig};
use crate::noise::WienerPath;

/// Smallest ensemble accepted by [`verify_energy_inequality`].
pub const MIN_MEMBERS: usize = 30;

/// Noise constants entering the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityConstants {
    /// `C²_{G₁}`
    pub c_g1_sq: f64,
    /// `L₂²`
    pub l2_sq: f64,
    /// `|O|`
    pub area: f64,
}

impl InequalityConstants {
    pub fn from_problem(problem: &Problem) -> Self {
        Self {
            c_g1_sq: problem.noise.c_g1().powi(2),
            l2_sq: problem.noise.l2_squared(&problem.potential),
            area: problem.basis.area(),
        }
    }

    fn rhs_member(&self, initial: &LedgerRecord, r: &LedgerRecord) -> f64 {
        self.growth(r.t) + initial.energy() + self.c_g1_sq * r.int_velocity_sq + 0.5 * self.l2_sq * r.int_grad_phase_sq
    }

    fn growth(&self, t: f64) -> f64 {
        (self.c_g1_sq + 0.5 * self.l2_sq * self.area) * t
    }
}

/// Discretization allowance `a·dt·T`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasAllowance {
    pub coefficient: f64,
    pub dt: f64,
    pub horizon: f64,
}

impl BiasAllowance {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn value(&self) -> f64 {
        self.coefficient * self.dt * self.horizon
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    fn of(xs: &[f64]) -> Self {
        let (mean, se) = mean_and_se(xs);
        Self { mean, se }
    }
}

/// All Monte-Carlo terms at one recorded time `t`. The left-hand side is
/// `sup_{τ≤t} E[E_λ(τ) + ∫₀^τ(‖∇u‖² + ‖μ‖²)]`; its parts are reported at the
/// maximizing record time `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermRow {
    pub t: f64,
    pub tau: f64,
    /// `E ½‖u(τ)‖²`
    pub kinetic: Estimate,
    /// `E ½‖∇φ(τ)‖²`
    pub interface: Estimate,
    /// `E ∫F_λ(φ(τ))`
    pub potential: Estimate,
    /// `E ∫₀^τ(‖∇u‖² + ‖μ‖²)`
    pub dissipation: Estimate,
    pub lhs: f64,
    /// `(C²_{G₁} + L₂²|O|/2) t`
    pub growth: f64,
    pub initial_energy: Estimate,
    /// `C²_{G₁} E∫₀ᵗ‖u‖²`
    pub velocity_feedback: Estimate,
    /// `(L₂²/2) E∫₀ᵗ‖∇φ‖²`
    pub phase_feedback: Estimate,
    pub rhs: f64,
    /// Member-paired `LHS − RHS`.
    pub difference: Estimate,
    pub allowance: f64,
    /// `2·SE + allowance − (LHS − RHS)`; non-negative when the row passes.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict {
    pub members: usize,
    pub constants: InequalityConstants,
    pub bias: BiasAllowance,
    pub rows: Vec<TermRow>,
    pub pass: bool,
    pub worst_margin: f64,
}

/// Monte-Carlo check of the energy inequality at every recorded time of the
/// member ledgers. All ledgers must share the same record times.
pub fn verify_energy_inequality(
    members: &[Vec<LedgerRecord>],
    constants: InequalityConstants,
    bias: BiasAllowance,
) -> Result<InequalityVerdict> {
    if members.len() < MIN_MEMBERS {
        return Err(Error::InsufficientEnsemble {
            got: members.len(),
            need: MIN_MEMBERS,
        });
    }
    let rows_len = members[0].len();
    if rows_len == 0 {
        return Err(Error::param("members", "ledgers are empty"));
    }
    for (m, ledger) in members.iter().enumerate() {
        let same = ledger.len() == rows_len
            && ledger.iter().zip(&members[0]).all(|(a, b)| a.step == b.step && a.t == b.t);
        if !same {
            return Err(Error::Member {
                member: m,
                source: Box::new(Error::param("members", "record times differ from member 0")),
            });
        }
    }
    let column = |i: usize, f: &dyn Fn(&LedgerRecord) -> f64| -> Estimate {
        Estimate::of(&members.iter().map(|l| f(&l[i])).collect::<Vec<_>>())
    };
    let allowance = bias.value();
    let mut best = 0usize;
    let mut best_value = f64::NEG_INFINITY;
    let mut rows = Vec::with_capacity(rows_len);
    for i in 0..rows_len {
        let value = column(i, &|r| r.energy() + r.dissipation()).mean;
        if value > best_value {
            best = i;
            best_value = value;
        }
        let t = members[0][i].t;
        let kinetic = column(best, &|r| r.kinetic);
        let interface = column(best, &|r| r.interface);
        let potential = column(best, &|r| r.potential);
        let dissipation = column(best, &|r| r.dissipation());
        let initial_energy = column(0, &|r| r.energy());
        let velocity_feedback = column(i, &|r| constants.c_g1_sq * r.int_velocity_sq);
        let phase_feedback = column(i, &|r| 0.5 * constants.l2_sq * r.int_grad_phase_sq);
        let growth = constants.growth(t);
        let lhs = kinetic.mean + interface.mean + potential.mean + dissipation.mean;
        let rhs = growth + initial_energy.mean + velocity_feedback.mean + phase_feedback.mean;
        let paired: Vec<f64> = members
            .iter()
            .map(|l| l[best].energy() + l[best].dissipation() - constants.rhs_member(&l[0], &l[i]))
            .collect();
        let difference = Estimate::of(&paired);
        let margin = 2.0 * difference.se + allowance - difference.mean;
        rows.push(TermRow {
            t,
            tau: members[0][best].t,
            kinetic,
            interface,
            potential,
            dissipation,
            lhs,
            growth,
            initial_energy,
            velocity_feedback,
            phase_feedback,
            rhs,
            difference,
            allowance,
            margin,
            pass: margin >= 0.0,
        });
    }
    let worst_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(InequalityVerdict {
        members: members.len(),
        constants,
        bias,
        pass: rows.iter().all(|r| r.pass),
        rows,
        worst_margin,
    })
}

/// Estimates the discretization bias coefficient `a` by running each seed at
/// `dt` and `dt/2` on the same Brownian path. With a first-order bias
/// `b(dt) ≈ c·dt`, the paired difference of `LHS − RHS` per member is
/// `≈ c·dt/2`, so `a = 2 max_t |mean Δ(t)| / (dt T)`.
pub fn estimate_bias(problem: &Problem, initial: &FieldState, t_final: f64, seeds: &[u64]) -> Result<BiasAllowance> {
    let dt = problem.stepper.dt;
    if seeds.is_empty() || t_final <= 0.0 {
        return Ok(BiasAllowance {
            coefficient: 0.0,
            dt,
            horizon: t_final,
        });
    }
    let constants = InequalityConstants::from_problem(problem);
    let fine = problem.clone().with_stepper(StepperConfig {
        dt: 0.5 * dt,
        ..problem.stepper
    })?;
    let steps = problem.steps_to(t_final)?;
    let mut diffs = vec![Vec::with_capacity(seeds.len()); steps as usize + 1];
    for &seed in seeds {
        let noise = problem.noise.with_seed(seed);
        let path = WienerPath::new(&noise, 0.5 * dt)?;
        let coarse_p = problem.clone().with_noise(noise.clone());
        let fine_p = fine.clone().with_noise(noise);
        let mut coarse = EnergyLedger::new(1);
        let mut finer = EnergyLedger::new(2);
        coarse_p.simulate(initial.clone(), t_final, &path, &mut [&mut coarse])?;
        let fine_init = fine_p.state(initial.t, 0, initial.a.clone(), initial.b.clone())?;
        fine_p.simulate(fine_init, t_final, &path, &mut [&mut finer])?;
        let (c0, f0) = (coarse.records()[0], finer.records()[0]);
        for (i, (c, f)) in coarse.records().iter().zip(finer.records()).enumerate() {
            let qc = c.energy() + c.dissipation() - constants.rhs_member(&c0, c);
            let qf = f.energy() + f.dissipation() - constants.rhs_member(&f0, f);
            diffs[i].push(qc - qf);
        }
    }
    let worst = diffs
        .iter()
        .map(|d| mean_and_se(d).0.abs())
        .fold(0.0f64, f64::max);
    Ok(BiasAllowance {
        coefficient: 2.0 * worst / (dt * t_final),
        dt,
        horizon: t_final,
    })
}
