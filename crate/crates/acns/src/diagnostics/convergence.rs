use serde::{Deserialize, Serialize};

use super::dependence::least_squares_slope;
use crate::error::{Error, Result};
use crate::galerkin::{FieldState, Problem};
use crate::noise::{IncrementSource, WienerPath};
use crate::spectral::{ScalarField, SpectralBasis, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceKind {
    /// Ladder of grid sizes `N`.
    InN,
    /// Ladder of Yosida parameters `λ`.
    InLambda,
    /// Ladder of time steps; all rungs share one Brownian path sampled at
    /// the smallest step.
    InDt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub kind: ConvergenceKind,
    pub ladder: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Root-mean-square over seeds of the final-time distance between rungs
    /// `i` and `i + 1`, on the coarsest common representation.
    pub distances: Vec<f64>,
    /// `ln(dᵢ/dᵢ₊₁) / ln(pᵢ/pᵢ₊₁)` for successive distances, with `p` the
    /// resolution parameter (`1/N`, `λ`, or `dt`).
    pub rates: Vec<f64>,
    /// Least-squares version of the rates over the whole ladder.
    pub fitted_rate: Option<f64>,
    /// Distances decrease along the ladder, or sit at round-off.
    pub monotone: bool,
}

/// Absolute distance below which successive rungs count as identical.
pub const ROUND_OFF: f64 = 1e-11;

/// Self-convergence study. `build(p, seed)` returns the problem and the
/// initial state at ladder value `p`; every rung is run to `t_final` and the
/// final states of neighbouring rungs are compared in `H × H`.
pub fn convergence_study<B>(
    kind: ConvergenceKind,
    ladder: &[f64],
    seeds: &[u64],
    t_final: f64,
    build: B,
) -> Result<ConvergenceReport>
where
    B: Fn(f64, u64) -> Result<(Problem, FieldState)>,
{
    if ladder.len() < 2 {
        return Err(Error::param("ladder", "need at least two rungs"));
    }
    if seeds.is_empty() {
        return Err(Error::param("seeds", "need at least one seed"));
    }
    let fine_dt = ladder.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sums = vec![0.0; ladder.len() - 1];
    for &seed in seeds {
        let mut finals = Vec::with_capacity(ladder.len());
        for &p in ladder {
            let (problem, initial) = build(p, seed)?;
            let summary = match kind {
                ConvergenceKind::InDt => {
                    let path = WienerPath::new(&problem.noise, fine_dt)?;
                    problem.simulate(initial, t_final, &path, &mut [])?
                }
                _ => problem.simulate(initial, t_final, &problem.noise as &dyn IncrementSource, &mut [])?,
            };
            finals.push((problem.basis.clone(), summary.final_state));
        }
        let coarse = finals
            .iter()
            .map(|(b, _)| b.clone())
            .min_by_key(|b| b.n())
            .expect("ladder is non-empty");
        for i in 0..finals.len() - 1 {
            let d = distance_on(&coarse, &finals[i], &finals[i + 1])?;
            sums[i] += d * d;
        }
    }
    let distances: Vec<f64> = sums.iter().map(|s| (s / seeds.len() as f64).sqrt()).collect();
    let param = |p: f64| match kind {
        ConvergenceKind::InN => 1.0 / p,
        _ => p,
    };
    let rates = (0..distances.len().saturating_sub(1))
        .map(|i| (distances[i] / distances[i + 1]).ln() / (param(ladder[i]) / param(ladder[i + 1])).ln())
        .collect();
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(i, d)| (param(ladder[i + 1]).ln(), d.ln()))
        .collect();
    let monotone = distances
        .windows(2)
        .all(|w| w[1] <= w[0] || w[1] <= ROUND_OFF);
    Ok(ConvergenceReport {
        kind,
        ladder: ladder.to_vec(),
        seeds: seeds.to_vec(),
        distances,
        rates,
        fitted_rate: least_squares_slope(&pts),
        monotone,
    })
}

type Final = (std::sync::Arc<SpectralBasis>, FieldState);

/// `(‖u₁ − u₂‖² + ‖φ₁ − φ₂‖²)^{1/2}` after moving both states to `coarse`.
fn distance_on(coarse: &SpectralBasis, x: &Final, y: &Final) -> Result<f64> {
    let scalar = |(b, s): &Final| -> Result<ScalarField> {
        Ok(ScalarField::from_coefficients(coarse.transfer(b, s.b.coefficients())?))
    };
    let velocity = |(b, s): &Final| -> Result<Option<VectorField>> {
        s.a.as_ref()
            .map(|a| Ok(VectorField::from_coefficients(coarse.transfer(b, a.coefficients())?)))
            .transpose()
    };
    let db = scalar(x)?.sub(&scalar(y)?);
    let mut d2 = coarse.norm_h(&db).powi(2);
    if let (Some(u), Some(v)) = (velocity(x)?, velocity(y)?) {
        d2 += coarse.norm_h_sigma(&u.sub(&v)).powi(2);
    }
    Ok(d2.sqrt())
}
