//! Energy bookkeeping along trajectories, the Monte-Carlo check of the
//! energy inequality, paired-path continuous dependence and
//! self-convergence studies.

mod convergence;
mod dependence;
mod inequality;
mod ledger;

pub use convergence::{convergence_study, ConvergenceKind, ConvergenceReport, ROUND_OFF};
pub use dependence::{dependence_experiment, DependenceConfig, DependenceReport, DependenceStudy, Perturbation};
pub use inequality::{
    estimate_bias, verify_energy_inequality, BiasAllowance, Estimate, InequalityConstants, InequalityVerdict,
    TermRow, MIN_MEMBERS,
};
pub use ledger::{ito_residual, EnergyLedger, LedgerRecord};

use crate::error::{Error, Result};
use crate::galerkin::{FieldState, Problem};
use crate::spectral::{SpectralBasis, VectorField};

/// `E_λ(φ, u) = ½‖u‖² + ½‖∇φ‖² + ∫F_λ(φ)`.
pub fn energy(problem: &Problem, state: &FieldState) -> f64 {
    problem.energy(state)
}

/// `‖∇A⁻¹(u₁ − u₂)‖² = Σ |a¹ₖ − a²ₖ|² / βₖ`.
pub fn dual_distance(basis: &SpectralBasis, u1: &VectorField, u2: &VectorField) -> Result<f64> {
    if u1.len() != basis.len() || u2.len() != basis.len() {
        return Err(Error::ModeMismatch {
            expected: basis.len(),
            got: if u1.len() != basis.len() { u1.len() } else { u2.len() },
        });
    }
    Ok(basis.norm_v_sigma_dual(&u1.sub(u2)).powi(2))
}

/// Sample mean and standard error of the mean (zero for a single sample).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests;
