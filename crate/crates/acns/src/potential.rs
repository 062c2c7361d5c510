//! The logarithmic Flory–Huggins potential and its Yosida regularization.
//!
//! The potential
//!
//! ```text
//! F(x) = θ/2 [(1+x) ln(1+x) + (1−x) ln(1−x)] − θ₀/2 x² + shift,   x ∈ [−1, 1]
//! ```
//!
//! is split as `F' = γ − c_F·id` where `γ(x) = F'(x) + c_F x` is monotone on
//! `(−1, 1)` and blows up at the pure phases. The resolvent `J_λ = (I + λγ)⁻¹`
//! and the Yosida approximation `γ_λ = (id − J_λ)/λ` give a globally Lipschitz
//! surrogate, from which the regularized potential
//!
//! ```text
//! F_λ(x) = F(0) + ∫₀ˣ γ_λ(s) ds − c_F/2 x²
//! ```
//!
//! is built. [`YosidaLayer::eval_f_lambda`] evaluates the integral by adaptive
//! Gauss–Legendre quadrature; [`YosidaLayer::moreau_f_lambda`] uses the closed
//! Moreau-envelope form and is the fast path used on physical grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of grid points used to bracket the minimum of the raw potential.
const SHIFT_SCAN_POINTS: usize = 10_000;

/// A maximal monotone graph on an open interval, single valued and smooth in
/// its interior, with `value(0) = 0`.
pub trait MonotoneGraph {
    /// Open domain `(lo, hi)`; infinite ends are allowed.
    fn domain(&self) -> (f64, f64);
    fn value(&self, y: f64) -> f64;
    /// Derivative of [`value`](Self::value); non-negative.
    fn derivative(&self, y: f64) -> f64;
    /// Convex primitive `∫₀ʸ value`.
    fn primitive(&self, y: f64) -> f64;
}

/// Linear graph `γ(y) = k·y`, the monotone part of a quadratic potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGraph {
    pub slope: f64,
}

impl MonotoneGraph for LinearGraph {
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn value(&self, y: f64) -> f64 {
        self.slope * y
    }
    fn derivative(&self, _y: f64) -> f64 {
        self.slope
    }
    fn primitive(&self, y: f64) -> f64 {
        0.5 * self.slope * y * y
    }
}

/// Flory–Huggins parameters together with the derived convexity constant and
/// positivity shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    theta: f64,
    theta0: f64,
    shift: f64,
    c_f: f64,
}

/// `(1+x) ln(1+x) + (1−x) ln(1−x)` with the `0·ln 0 = 0` extension.
fn entropy(x: f64) -> f64 {
    let xlogx_1p = |t: f64| if t == -1.0 { 0.0 } else { (1.0 + t) * t.ln_1p() };
    xlogx_1p(x) + xlogx_1p(-x)
}

impl PotentialSpec {
    /// Builds the potential for `0 < theta < theta0`, fixing `c_F = θ₀ − θ`
    /// and the shift that makes `min F = 0` on `[−1, 1]`.
    pub fn new(theta: f64, theta0: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::param("theta", format!("must be positive, got {theta}")));
        }
        if !(theta0.is_finite() && theta0 > theta) {
            return Err(Error::param(
                "theta0",
                format!("the potential needs 0 < theta < theta0 (got theta = {theta}, theta0 = {theta0})"),
            ));
        }
        let mut spec = Self {
            theta,
            theta0,
            shift: 0.0,
            c_f: theta0 - theta,
        };
        let (_, min) = spec.raw_minimum();
        spec.shift = -min;
        Ok(spec)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Lower convexity bound: `F'' ≥ −c_F` on `(−1, 1)`.
    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    fn raw(&self, x: f64) -> f64 {
        0.5 * self.theta * entropy(x) - 0.5 * self.theta0 * x * x
    }

    /// Location and value of the minimum of the unshifted potential. The
    /// potential is even, so only `[0, 1]` is scanned; the interior critical
    /// point is then refined by bisection on `F'`.
    fn raw_minimum(&self) -> (f64, f64) {
        let h = 1.0 / SHIFT_SCAN_POINTS as f64;
        let (mut best_i, mut best) = (0usize, self.raw(0.0));
        for i in 1..=SHIFT_SCAN_POINTS {
            let v = self.raw(i as f64 * h);
            if v < best {
                best = v;
                best_i = i;
            }
        }
        if best_i == 0 || best_i == SHIFT_SCAN_POINTS {
            return (best_i as f64 * h, best);
        }
        let (mut lo, mut hi) = ((best_i - 1) as f64 * h, ((best_i + 1) as f64 * h).min(1.0 - f64::EPSILON));
        let fp = |x: f64| self.theta * x.atanh() - self.theta0 * x;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if fp(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        let v = self.raw(x).min(best).min(self.raw(1.0));
        (x, v)
    }

    /// Positive minimiser of `F` (the pure-phase value of the double well).
    pub fn well_minimizer(&self) -> f64 {
        self.raw_minimum().0
    }

    /// `F(x)` on `[−1, 1]`, extended by continuity at `±1`.
    pub fn eval_f(&self, x: f64) -> Result<f64> {
        if !(x.abs() <= 1.0) {
            return Err(Error::Domain { what: "F", x });
        }
        Ok(self.raw(x) + self.shift)
    }

    /// `F'(x) = θ atanh(x) − θ₀ x` on the open interval.
    pub fn eval_fprime(&self, x: f64) -> Result<f64> {
        if !(x.abs() < 1.0) {
            return Err(Error::Domain { what: "F'", x });
        }
        Ok(self.theta * x.atanh() - self.theta0 * x)
    }

    /// `F''(x) = θ/(1−x²) − θ₀`.
    pub fn eval_fsecond(&self, x: f64) -> Result<f64> {
        if !(x.abs() < 1.0) {
            return Err(Error::Domain { what: "F''", x });
        }
        Ok(self.theta / ((1.0 - x) * (1.0 + x)) - self.theta0)
    }

    /// Monotone part `γ(x) = F'(x) + c_F x`.
    pub fn gamma(&self, x: f64) -> Result<f64> {
        if !(x.abs() < 1.0) {
            return Err(Error::Domain { what: "gamma", x });
        }
        Ok(MonotoneGraph::value(self, x))
    }
}

impl MonotoneGraph for PotentialSpec {
    fn domain(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn value(&self, y: f64) -> f64 {
        self.theta * y.atanh() - (self.theta0 - self.c_f) * y
    }

    fn derivative(&self, y: f64) -> f64 {
        let d = self.theta / ((1.0 - y) * (1.0 + y)) - self.theta0 + self.c_f;
        d.max(0.0)
    }

    fn primitive(&self, y: f64) -> f64 {
        self.raw(y) - self.raw(0.0) + 0.5 * self.c_f * y * y
    }
}

/// Regularization parameters: `λ`, resolvent tolerance and quadrature panels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YosidaLayer {
    lambda: f64,
    root_tolerance: f64,
    quadrature_order: usize,
}

/// Pointwise quantities of the regularized potential at one argument, sharing
/// a single resolvent solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaPoint {
    /// `J_λ(x)`
    pub resolvent: f64,
    /// `γ_λ(x)`
    pub gamma: f64,
    /// `F'_λ(x) = γ_λ(x) − c_F x`
    pub fprime: f64,
    /// `F''_λ(x) = γ_λ'(x) − c_F`
    pub fsecond: f64,
    /// `F_λ(x)` through the Moreau envelope.
    pub f: f64,
    /// `J_λ'(x)`
    pub resolvent_slope: f64,
}

impl YosidaLayer {
    pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-12;
    pub const DEFAULT_QUADRATURE_ORDER: usize = 32;
    const MAX_ITERATIONS: usize = 400;
    const GAUSS_POINTS: usize = 8;

    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_settings(lambda, Self::DEFAULT_ROOT_TOLERANCE, Self::DEFAULT_QUADRATURE_ORDER)
    }

    pub fn with_settings(lambda: f64, root_tolerance: f64, quadrature_order: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::param("lambda", format!("must lie in (0, 1), got {lambda}")));
        }
        if !(root_tolerance > 0.0 && root_tolerance.is_finite()) {
            return Err(Error::param("root_tolerance", "must be positive"));
        }
        if quadrature_order == 0 {
            return Err(Error::param("quadrature_order", "must be positive"));
        }
        Ok(Self {
            lambda,
            root_tolerance,
            quadrature_order,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn root_tolerance(&self) -> f64 {
        self.root_tolerance
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    /// Solves `y + λγ(y) = x` for `y` inside the domain of `γ`.
    ///
    /// Safeguarded Newton inside a shrinking bracket: Newton steps are taken
    /// whenever they stay in the bracket, bisection otherwise. Once the
    /// bracket is below `root_tolerance` a final Newton step polishes the
    /// root. For arguments whose root is closer to a singular endpoint than
    /// the floating-point spacing, the last representable interior point is
    /// returned.
    pub fn resolvent<G: MonotoneGraph + ?Sized>(&self, graph: &G, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain { what: "resolvent", x });
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        let lambda = self.lambda;
        let (dlo, dhi) = graph.domain();
        let residual = |y: f64| y + lambda * graph.value(y) - x;
        // The root lies between 0 and x because γ(0) = 0 and γ is monotone.
        let (mut lo, mut hi) = if x > 0.0 { (0.0, x.min(dhi)) } else { (x.max(dlo), 0.0) };
        let inside = |y: f64| y > dlo && y < dhi;
        // Start on the far side of the root, where Newton converges
        // monotonically (γ is convex on the positive half and concave on the
        // negative half of its domain).
        let mut y = x.clamp(dlo.next_up(), dhi.next_down());

        for _ in 0..Self::MAX_ITERATIONS {
            let f = residual(y);
            if f == 0.0 {
                return Ok(y);
            }
            if f < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let slope = 1.0 + lambda * graph.derivative(y);
            let newton = y - f / slope;
            let next = if newton.is_finite() && newton > lo && newton < hi && inside(newton) {
                newton
            } else {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi || !inside(mid) {
                    // Bracket collapsed to neighbouring doubles.
                    return Ok(if inside(lo) && (!inside(hi) || residual(lo).abs() <= residual(hi).abs()) {
                        lo
                    } else {
                        hi
                    });
                }
                mid
            };
            // Tolerance relative to the distance from the singular endpoints,
            // where γ is steep and an absolute error in y is amplified.
            let tol = self.root_tolerance * 1f64.min(dhi - next).min(next - dlo);
            if hi - lo <= tol {
                return Ok(next);
            }
            if (next - y).abs() <= 0.25 * tol {
                // A tiny step can also come from a huge slope near a singular
                // endpoint; accept only if the root is bracketed around it.
                let a = (next - tol).max(lo);
                let b = (next + tol).min(hi);
                let (fa, fb) = (residual(a), residual(b));
                if fa <= 0.0 && fb >= 0.0 {
                    return Ok(next);
                }
                if fa > 0.0 {
                    hi = a;
                } else {
                    lo = b;
                }
                y = 0.5 * (lo + hi);
                continue;
            }
            y = next;
        }
        Err(Error::Convergence {
            x,
            iterations: Self::MAX_ITERATIONS,
        })
    }

    /// `J_λ(x)` of the Flory–Huggins graph; always strictly inside `(−1, 1)`.
    pub fn resolvent_j(&self, spec: &PotentialSpec, x: f64) -> Result<f64> {
        self.resolvent(spec, x)
    }

    /// `γ_λ(x) = (x − J_λ(x))/λ`.
    pub fn yosida_gamma(&self, spec: &PotentialSpec, x: f64) -> Result<f64> {
        self.yosida_of(spec, x)
    }

    fn yosida_of<G: MonotoneGraph + ?Sized>(&self, graph: &G, x: f64) -> Result<f64> {
        Ok((x - self.resolvent(graph, x)?) / self.lambda)
    }

    /// `F'_λ(x) = γ_λ(x) − c_F x`.
    pub fn eval_fprime_lambda(&self, spec: &PotentialSpec, x: f64) -> Result<f64> {
        Ok(self.yosida_gamma(spec, x)? - spec.c_f() * x)
    }

    /// `F_λ(x)` with the integral of `γ_λ` evaluated by adaptive composite
    /// Gauss–Legendre quadrature over `quadrature_order` initial panels.
    pub fn eval_f_lambda(&self, spec: &PotentialSpec, x: f64) -> Result<f64> {
        let integral = self.integrate_yosida(spec, x)?;
        Ok(spec.eval_f(0.0)? + integral - 0.5 * spec.c_f() * x * x)
    }

    /// `∫₀ˣ γ_λ(s) ds` by adaptive Gauss–Legendre quadrature.
    pub fn integrate_yosida<G: MonotoneGraph + ?Sized>(&self, graph: &G, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let rule = GaussLegendre::new(Self::GAUSS_POINTS);
        let panels = self.quadrature_order;
        let width = x / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let a = p as f64 * width;
            let b = if p + 1 == panels { x } else { a + width };
            total += self.adaptive_panel(graph, &rule, a, b, 0)?;
        }
        Ok(total)
    }

    fn adaptive_panel<G: MonotoneGraph + ?Sized>(
        &self,
        graph: &G,
        rule: &GaussLegendre,
        a: f64,
        b: f64,
        depth: u32,
    ) -> Result<f64> {
        let whole = rule.integrate(a, b, |s| self.yosida_of(graph, s))?;
        let mid = 0.5 * (a + b);
        let left = rule.integrate(a, mid, |s| self.yosida_of(graph, s))?;
        let right = rule.integrate(mid, b, |s| self.yosida_of(graph, s))?;
        let refined = left + right;
        let tol = 1e-14 * (1.0 + refined.abs());
        if (refined - whole).abs() <= tol || depth >= 12 {
            return Ok(refined);
        }
        Ok(self.adaptive_panel(graph, rule, a, mid, depth + 1)?
            + self.adaptive_panel(graph, rule, mid, b, depth + 1)?)
    }

    /// `F_λ(x)` from the Moreau envelope
    /// `∫₀ˣ γ_λ = j(J_λ x) + (x − J_λ x)²/(2λ)`, with `j` the convex primitive
    /// of `γ`. Agrees with [`eval_f_lambda`](Self::eval_f_lambda) to
    /// quadrature accuracy.
    pub fn moreau_f_lambda(&self, spec: &PotentialSpec, x: f64) -> Result<f64> {
        Ok(self.point(spec, x)?.f)
    }

    /// Evaluates every pointwise Yosida quantity with one resolvent solve.
    pub fn point(&self, spec: &PotentialSpec, x: f64) -> Result<YosidaPoint> {
        let j = self.resolvent(spec, x)?;
        let gamma = (x - j) / self.lambda;
        let slope_graph = MonotoneGraph::derivative(spec, j);
        let resolvent_slope = 1.0 / (1.0 + self.lambda * slope_graph);
        let c_f = spec.c_f();
        let envelope = MonotoneGraph::primitive(spec, j) + 0.5 * self.lambda * gamma * gamma;
        Ok(YosidaPoint {
            resolvent: j,
            gamma,
            fprime: gamma - c_f * x,
            fsecond: slope_graph * resolvent_slope - c_f,
            f: spec.shift() + spec.raw(0.0) + envelope - 0.5 * c_f * x * x,
            resolvent_slope,
        })
    }

    /// [`point`](Self::point) for every entry of a grid.
    pub fn points(&self, spec: &PotentialSpec, values: &[f64]) -> Result<Vec<YosidaPoint>> {
        values.iter().map(|&x| self.point(spec, x)).collect()
    }

    /// Lower bound on `F_λ` over the real line:
    /// `F_λ ≥ −c_F² λ / (2 (1 − λ c_F))`, returned as a non-negative slack.
    /// Infinite when `λ c_F ≥ 1`.
    pub fn negativity_slack(&self, spec: &PotentialSpec) -> f64 {
        let c = spec.c_f();
        let denom = 1.0 - self.lambda * c;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            c * c * self.lambda / (2.0 * denom)
        }
    }
}

/// Gauss–Legendre rule on `[−1, 1]`, nodes from Newton iteration on `P_n`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { z } else { p1 };
                let pn1 = if n == 1 { 1.0 } else { p0 };
                dp = nf * (z * pn - pn1) / (z * z - 1.0);
                let dz = pn / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let half = 0.5 * (b - a);
        let centre = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(centre + half * x)?;
        }
        Ok(acc * half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PotentialSpec {
        PotentialSpec::new(1.0, 2.0).unwrap()
    }

    /// Independent bisection on `y + λγ(y) = x`, used as an oracle.
    fn bisect_resolvent(spec: &PotentialSpec, lambda: f64, x: f64) -> f64 {
        let g = |y: f64| y + lambda * (spec.theta() * y.atanh() - spec.theta() * y) - x;
        let (mut lo, mut hi) = (-(1.0f64.next_down()), 1.0f64.next_down());
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PotentialSpec::new(2.0, 2.0).is_err());
        assert!(PotentialSpec::new(3.0, 2.0).is_err());
        assert!(PotentialSpec::new(0.0, 2.0).is_err());
        assert!(YosidaLayer::new(0.0).is_err());
        assert!(YosidaLayer::new(1.0).is_err());
    }

    #[test]
    fn f_at_zero_is_the_shift_and_endpoint_uses_continuity() {
        let s = spec();
        assert_eq!(s.eval_f(0.0).unwrap(), s.shift());
        let expected = 2f64.ln() - 1.0 + s.shift();
        assert!((s.eval_f(1.0).unwrap() - expected).abs() < 1e-15);
        assert!((s.eval_f(-1.0).unwrap() - expected).abs() < 1e-15);
        assert!(s.eval_f(1.0 + 1e-12).is_err());
    }

    #[test]
    fn shift_matches_fine_grid_scan() {
        let s = spec();
        // 10⁶-point scan of the raw potential over [−1, 1].
        let xlogx = |t: f64| if t == 0.0 { 0.0 } else { t * t.ln() };
        let n = 1_000_000;
        let mut min = f64::INFINITY;
        for i in 0..=n {
            let x = -1.0 + 2.0 * i as f64 / n as f64;
            let raw = 0.5 * (xlogx(1.0 + x) + xlogx(1.0 - x)) - x * x;
            min = min.min(raw);
        }
        assert!((s.shift() + min).abs() < 1e-10, "shift {} vs scan {}", s.shift(), -min);
        // F ≥ 0 on the whole interval.
        for i in 0..=2000 {
            let x = -1.0 + i as f64 / 1000.0;
            assert!(s.eval_f(x).unwrap() >= -1e-15);
        }
    }

    #[test]
    fn fprime_values() {
        let s = spec();
        assert_eq!(s.eval_fprime(0.0).unwrap(), 0.0);
        let expected = 0.5 * 3f64.ln() - 1.0;
        assert!((s.eval_fprime(0.5).unwrap() - expected).abs() < 1e-15);
        let h = 1e-6;
        let fd = (s.eval_f(0.5 + h).unwrap() - s.eval_f(0.5 - h).unwrap()) / (2.0 * h);
        assert!((fd - expected).abs() < 1e-8);
        assert!(s.eval_fprime(1.0).is_err());
        let mut prev = s.eval_fprime(0.99).unwrap();
        for x in [0.999, 0.9999, 0.99999, 0.999999] {
            let v = s.eval_fprime(x).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn gamma_values_and_monotonicity() {
        let s = spec();
        assert_eq!(s.gamma(0.0).unwrap(), 0.0);
        let expected = 0.5 * 19f64.ln() - 0.9;
        let composed = s.eval_fprime(0.9).unwrap() + (2.0 - 1.0) * 0.9;
        assert!((s.gamma(0.9).unwrap() - expected).abs() < 1e-14);
        assert!((composed - expected).abs() < 1e-14);
        let mut prev = f64::NEG_INFINITY;
        for i in 1..2000 {
            let x = -1.0 + i as f64 / 1000.0;
            let v = s.gamma(x).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn resolvent_matches_bisection_oracle() {
        let s = spec();
        let layer = YosidaLayer::new(0.5).unwrap();
        assert_eq!(layer.resolvent_j(&s, 0.0).unwrap(), 0.0);
        let oracle = bisect_resolvent(&s, 0.5, 0.9);
        let got = layer.resolvent_j(&s, 0.9).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
        for x in [-7.0, -1.3, -0.2, 0.05, 0.7, 1.01, 2.5, 40.0] {
            for lambda in [0.1, 0.01, 0.001] {
                let layer = YosidaLayer::new(lambda).unwrap();
                let got = layer.resolvent_j(&s, x).unwrap();
                let oracle = bisect_resolvent(&s, lambda, x);
                assert!(got > -1.0 && got < 1.0);
                assert!((got - oracle).abs() < 1e-12, "x={x} λ={lambda}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn linear_graph_resolvent_is_closed_form() {
        let layer = YosidaLayer::new(0.3).unwrap();
        for k in [0.0, 0.5, 4.0] {
            let g = LinearGraph { slope: k };
            for x in [-3.0, -0.1, 0.0, 0.8, 12.0] {
                let got = layer.resolvent(&g, x).unwrap();
                assert!((got - x / (1.0 + 0.3 * k)).abs() < 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn yosida_converges_to_gamma() {
        let s = spec();
        let g = s.gamma(0.5).unwrap();
        let err = |lambda: f64| {
            let layer = YosidaLayer::new(lambda).unwrap();
            (layer.yosida_gamma(&s, 0.5).unwrap() - g).abs()
        };
        assert!(err(0.01) < err(0.1));
        assert_eq!(YosidaLayer::new(0.1).unwrap().yosida_gamma(&s, 0.0).unwrap(), 0.0);

        let fp = s.eval_fprime(0.3).unwrap();
        let errs: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&l| (YosidaLayer::new(l).unwrap().eval_fprime_lambda(&s, 0.3).unwrap() - fp).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn f_lambda_zero_and_monotone_limit() {
        let s = spec();
        let layer = YosidaLayer::new(0.1).unwrap();
        assert_eq!(layer.eval_f_lambda(&s, 0.0).unwrap(), s.shift());
        let target = s.eval_f(0.5).unwrap();
        let vals: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&l| YosidaLayer::new(l).unwrap().eval_f_lambda(&s, 0.5).unwrap())
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2] && vals[2] <= target, "{vals:?} {target}");
    }

    #[test]
    fn quadrature_and_moreau_forms_agree() {
        let s = spec();
        for lambda in [0.1, 0.01] {
            let layer = YosidaLayer::new(lambda).unwrap();
            for x in [-2.0, -0.97, -0.4, 0.1, 0.6, 0.99, 1.2, 3.0] {
                let q = layer.eval_f_lambda(&s, x).unwrap();
                let m = layer.moreau_f_lambda(&s, x).unwrap();
                assert!((q - m).abs() < 1e-11 * (1.0 + q.abs()), "λ={lambda} x={x}: {q} vs {m}");
            }
        }
    }

    #[test]
    fn f_lambda_derivative_matches_fprime_lambda() {
        let s = spec();
        let layer = YosidaLayer::new(0.05).unwrap();
        let h = 1e-5;
        for x in [-1.5, -0.8, -0.3, 0.2, 0.7, 0.95, 2.0] {
            let fd = (layer.eval_f_lambda(&s, x + h).unwrap() - layer.eval_f_lambda(&s, x - h).unwrap()) / (2.0 * h);
            let exact = layer.eval_fprime_lambda(&s, x).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "x={x}: {fd} vs {exact}");
        }
    }

    #[test]
    fn point_second_derivative_matches_finite_difference() {
        let s = spec();
        let layer = YosidaLayer::new(0.02).unwrap();
        let h = 1e-5;
        for x in [-1.1, -0.5, 0.0, 0.4, 0.9, 1.05] {
            let p = layer.point(&s, x).unwrap();
            let fd = (layer.eval_fprime_lambda(&s, x + h).unwrap() - layer.eval_fprime_lambda(&s, x - h).unwrap())
                / (2.0 * h);
            assert!((fd - p.fsecond).abs() < 1e-5 * (1.0 + fd.abs()), "x={x}: {fd} vs {}", p.fsecond);
        }
    }

    #[test]
    fn negativity_slack_bounds_f_lambda() {
        let s = spec();
        for lambda in [0.1, 0.01] {
            let layer = YosidaLayer::new(lambda).unwrap();
            let slack = layer.negativity_slack(&s);
            for i in 0..=4000 {
                let x = -2.0 + i as f64 / 1000.0;
                assert!(layer.moreau_f_lambda(&s, x).unwrap() >= -slack - 1e-14);
            }
        }
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(8);
        for deg in 0..16 {
            let got = rule.integrate(0.0, 1.0, |x| Ok(x.powi(deg))).unwrap();
            assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "degree {deg}");
        }
        let w: f64 = rule.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn compensation_bound_by_grid_scan() {
        let s = spec();
        let sigma: f64 = 0.7;
        let bound = sigma * sigma * (s.theta() + s.theta0());
        for i in 1..100_000 {
            let x = -1.0 + 2.0 * i as f64 / 100_000.0;
            let g = sigma * (1.0 - x * x);
            assert!((s.eval_fsecond(x).unwrap() * g * g).abs() <= bound);
        }
    }

    #[test]
    fn fprime_lambda_approaches_fprime() {
        let s = spec();
        let exact = s.eval_fprime(0.3).unwrap();
        let errs: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&l| (YosidaLayer::new(l).unwrap().eval_fprime_lambda(&s, 0.3).unwrap() - exact).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    use proptest::prelude::*;

    fn lambdas() -> impl Strategy<Value = f64> {
        prop_oneof![Just(0.1), Just(0.01), Just(0.001), 0.001f64..0.9]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn resolvent_is_non_expansive_and_confined(lambda in lambdas(), x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let s = spec();
            let layer = YosidaLayer::new(lambda).unwrap();
            let (jx, jy) = (layer.resolvent_j(&s, x).unwrap(), layer.resolvent_j(&s, y).unwrap());
            prop_assert!((jx - jy).abs() <= (x - y).abs() + 2.0 * layer.root_tolerance());
            prop_assert!(jx > -1.0 && jx < 1.0);
        }

        #[test]
        fn yosida_gamma_is_lipschitz_monotone_and_consistent(lambda in lambdas(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let s = spec();
            let layer = YosidaLayer::new(lambda).unwrap();
            let (gx, gy) = (layer.yosida_gamma(&s, x).unwrap(), layer.yosida_gamma(&s, y).unwrap());
            prop_assert!((gx - gy).abs() <= (x - y).abs() / lambda * (1.0 + 1e-9) + 1e-9);
            prop_assert!((gx - gy) * (x - y) >= -1e-9);
            let j = layer.resolvent_j(&s, x).unwrap();
            let direct = s.gamma(j).unwrap();
            // Near ±1 the representable spacing of J alone moves γ(J) by
            // γ'(J)·ulp; once 1 − |J| reaches machine precision the root is
            // not representable at all, so the identity is checked away from
            // that layer.
            if 1.0 - j.abs() > 1e-6 {
                let ulp_term = MonotoneGraph::derivative(&s, j) * 4.0 * f64::EPSILON;
                prop_assert!((gx - direct).abs() <= 10.0 * layer.root_tolerance() + ulp_term);
            }
            let (fx, fy) = (layer.eval_fprime_lambda(&s, x).unwrap(), layer.eval_fprime_lambda(&s, y).unwrap());
            prop_assert!((fx - fy).abs() <= (1.0 / lambda + s.c_f()) * (x - y).abs() * (1.0 + 1e-9) + 1e-9);
        }

        #[test]
        fn f_lambda_semiconvexity(lambda in lambdas(), x in -3.0f64..3.0) {
            let s = spec();
            let layer = YosidaLayer::new(lambda).unwrap();
            let h = 1e-4;
            let f = |t: f64| layer.moreau_f_lambda(&s, t).unwrap();
            let second = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            prop_assert!(second >= -s.c_f() - 1e-6 * (1.0 + 1.0 / lambda) - 1e-4);
        }
    }
}
