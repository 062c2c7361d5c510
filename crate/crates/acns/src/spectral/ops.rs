//! Differential operators, projections, dealiased products and norms.

use num_complex::Complex64;

use super::{ScalarField, SpectralBasis, SpectralVector, VectorField};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Vector field sampled on the computational grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalVector {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SpectralBasis {
    fn require_velocity(&self) -> Result<()> {
        if !self.has_velocity() {
            return Err(Error::BasisMismatch(
                "velocity operators need the periodic basis with velocity coupling".into(),
            ));
        }
        Ok(())
    }

    fn check_scalar(&self, f: &ScalarField) -> Result<()> {
        self.check_len(f.len())
    }

    fn check_vector(&self, u: &VectorField) -> Result<()> {
        self.require_velocity()?;
        self.check_len(u.len())
    }

    // ---- linear operators -------------------------------------------------

    pub fn gradient(&self, phi: &ScalarField) -> SpectralVector {
        let c = phi.coefficients();
        let mut g = SpectralVector::zeros(self.len());
        for (idx, z) in c.iter().enumerate() {
            let (kx, ky) = self.wave_vector(idx);
            g.x[idx] = I * kx * z;
            g.y[idx] = I * ky * z;
        }
        g
    }

    pub fn laplacian(&self, phi: &ScalarField) -> ScalarField {
        ScalarField::from_coefficients(
            phi.coefficients()
                .iter()
                .enumerate()
                .map(|(idx, z)| -self.eigenvalue(idx) * z)
                .collect(),
        )
    }

    pub fn divergence(&self, f: &SpectralVector) -> ScalarField {
        ScalarField::from_coefficients(
            (0..self.len())
                .map(|idx| {
                    let (kx, ky) = self.wave_vector(idx);
                    I * (f.x[idx] * kx + f.y[idx] * ky)
                })
                .collect(),
        )
    }

    /// Cartesian components of a solenoidal field.
    pub fn velocity_components(&self, u: &VectorField) -> Result<SpectralVector> {
        self.check_vector(u)?;
        let mut v = SpectralVector::zeros(self.len());
        for (idx, a) in u.coefficients().iter().enumerate() {
            let (px, py) = self.polarization(idx);
            v.x[idx] = px * a;
            v.y[idx] = py * a;
        }
        Ok(v)
    }

    /// Leray projection onto divergence-free fields: per mode
    /// `f̂ − (k·f̂)k/|k|²`, stored along the polarization. The mean mode is
    /// dropped.
    pub fn leray_project(&self, f: &SpectralVector) -> Result<VectorField> {
        self.require_velocity()?;
        self.check_len(f.x.len())?;
        self.check_len(f.y.len())?;
        let coeffs = (0..self.len())
            .map(|idx| {
                let (px, py) = self.polarization(idx);
                px.conj() * f.x[idx] + py.conj() * f.y[idx]
            })
            .collect();
        Ok(VectorField::from_coefficients(coeffs))
    }

    /// `f − P f` for `k ≠ 0` together with the mean of `f`: the part removed
    /// by [`leray_project`](Self::leray_project).
    pub fn gradient_part(&self, f: &SpectralVector) -> Result<SpectralVector> {
        let pf = self.velocity_components(&self.leray_project(f)?)?;
        Ok(f.axpy(-1.0, &pf))
    }

    /// Stokes operator: multiplication by `β_k`.
    pub fn stokes(&self, u: &VectorField) -> Result<VectorField> {
        self.check_vector(u)?;
        Ok(VectorField::from_coefficients(
            u.coefficients()
                .iter()
                .enumerate()
                .map(|(idx, a)| a * self.eigenvalue(idx))
                .collect(),
        ))
    }

    /// Inverse Stokes operator: division by `β_k`. The mean mode must vanish.
    pub fn inverse_stokes(&self, u: &VectorField) -> Result<VectorField> {
        self.check_vector(u)?;
        if u.coefficients()[0].norm() > 0.0 {
            return Err(Error::BasisMismatch("mean velocity mode must be zero".into()));
        }
        Ok(VectorField::from_coefficients(
            u.coefficients()
                .iter()
                .enumerate()
                .map(|(idx, a)| {
                    let beta = self.eigenvalue(idx);
                    if beta > 0.0 {
                        a / beta
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect(),
        ))
    }

    // ---- grid transforms --------------------------------------------------

    pub fn scalar_to_physical(&self, phi: &ScalarField) -> Vec<f64> {
        self.to_physical(phi.coefficients())
    }

    pub fn scalar_from_physical(&self, values: &[f64]) -> ScalarField {
        ScalarField::from_coefficients(self.from_physical(values))
    }

    pub fn vector_to_physical(&self, f: &SpectralVector) -> PhysicalVector {
        PhysicalVector {
            x: self.to_physical(&f.x),
            y: self.to_physical(&f.y),
        }
    }

    pub fn vector_from_physical(&self, f: &PhysicalVector) -> SpectralVector {
        SpectralVector {
            x: self.from_physical(&f.x),
            y: self.from_physical(&f.y),
        }
    }

    pub fn velocity_to_physical(&self, u: &VectorField) -> Result<PhysicalVector> {
        Ok(self.vector_to_physical(&self.velocity_components(u)?))
    }

    /// Dealiased pointwise product of two grid functions.
    pub fn product(&self, f: &[f64], g: &[f64]) -> Vec<Complex64> {
        let p: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        self.from_physical(&p)
    }

    // ---- nonlinear terms --------------------------------------------------

    /// `u·∇φ`, dealiased.
    pub fn convect(&self, u: &VectorField, phi: &ScalarField) -> Result<ScalarField> {
        self.check_vector(u)?;
        self.check_scalar(phi)?;
        let uph = self.velocity_to_physical(u)?;
        let grad = self.vector_to_physical(&self.gradient(phi));
        Ok(Self::convect_physical(self, &uph, &grad))
    }

    pub(crate) fn convect_physical(&self, u: &PhysicalVector, grad: &PhysicalVector) -> ScalarField {
        let p: Vec<f64> = (0..u.x.len()).map(|i| u.x[i] * grad.x[i] + u.y[i] * grad.y[i]).collect();
        self.scalar_from_physical(&p)
    }

    /// `(u·∇)v` without projection, dealiased.
    pub fn advect(&self, u: &VectorField, v: &VectorField) -> Result<SpectralVector> {
        self.check_vector(u)?;
        self.check_vector(v)?;
        let uph = self.velocity_to_physical(u)?;
        let vc = self.velocity_components(v)?;
        Ok(self.advect_physical(&uph, &vc))
    }

    pub(crate) fn advect_physical(&self, u: &PhysicalVector, v: &SpectralVector) -> SpectralVector {
        let component = |c: &[Complex64]| {
            let g = self.gradient(&ScalarField::from_coefficients(c.to_vec()));
            let gp = self.vector_to_physical(&g);
            let p: Vec<f64> = (0..u.x.len()).map(|i| u.x[i] * gp.x[i] + u.y[i] * gp.y[i]).collect();
            self.from_physical(&p)
        };
        SpectralVector {
            x: component(&v.x),
            y: component(&v.y),
        }
    }

    /// `B(u) = P[(u·∇)u]`.
    pub fn nonlinear_b(&self, u: &VectorField) -> Result<VectorField> {
        self.leray_project(&self.advect(u, u)?)
    }

    /// `b(u, v, w) = ∫ (u·∇)v · w`.
    pub fn trilinear_b(&self, u: &VectorField, v: &VectorField, w: &VectorField) -> Result<f64> {
        let adv = self.advect(u, v)?;
        let wc = self.velocity_components(w)?;
        Ok(self.inner_vector_raw(&adv, &wc))
    }

    /// `μ∇φ` without projection, dealiased.
    pub fn korteweg_unprojected(&self, mu: &ScalarField, phi: &ScalarField) -> Result<SpectralVector> {
        self.check_scalar(mu)?;
        self.check_scalar(phi)?;
        let m = self.scalar_to_physical(mu);
        let g = self.vector_to_physical(&self.gradient(phi));
        Ok(SpectralVector {
            x: self.product(&m, &g.x),
            y: self.product(&m, &g.y),
        })
    }

    /// Korteweg force `P(μ∇φ)`.
    pub fn korteweg(&self, mu: &ScalarField, phi: &ScalarField) -> Result<VectorField> {
        self.leray_project(&self.korteweg_unprojected(mu, phi)?)
    }

    /// `P(−div(∇φ ⊗ ∇φ))`, which coincides with `P(μ∇φ)` whenever
    /// `μ + Δφ` is a function of `φ` alone.
    pub fn korteweg_stress_form(&self, phi: &ScalarField) -> Result<VectorField> {
        self.check_scalar(phi)?;
        let g = self.vector_to_physical(&self.gradient(phi));
        let txx = self.product(&g.x, &g.x);
        let txy = self.product(&g.x, &g.y);
        let tyy = self.product(&g.y, &g.y);
        let mut div = SpectralVector::zeros(self.len());
        for idx in 0..self.len() {
            let (kx, ky) = self.wave_vector(idx);
            div.x[idx] = -I * (txx[idx] * kx + txy[idx] * ky);
            div.y[idx] = -I * (txy[idx] * kx + tyy[idx] * ky);
        }
        self.leray_project(&div)
    }

    /// Coefficients of a field given on another basis of the same domain,
    /// keeping the wave-vectors both bases retain.
    pub fn transfer(&self, from: &SpectralBasis, c: &[Complex64]) -> Result<Vec<Complex64>> {
        if from.length() != self.length() || from.boundary() != self.boundary() {
            return Err(Error::BasisMismatch("transfer needs bases of the same domain".into()));
        }
        from.check_len(c.len())?;
        let k = self.cutoff().min(from.cutoff()) as i64;
        let mut out = self.zeros();
        for ky in -k..=k {
            for kx in -k..=k {
                out[self.entry(kx, ky)] = c[from.entry(kx, ky)];
            }
        }
        Ok(out)
    }

    // ---- inner products and norms -----------------------------------------

    pub fn inner_scalar(&self, a: &ScalarField, b: &ScalarField) -> f64 {
        self.inner_raw(a.coefficients(), b.coefficients())
    }

    pub fn inner_velocity(&self, u: &VectorField, v: &VectorField) -> f64 {
        self.inner_raw(u.coefficients(), v.coefficients())
    }

    pub fn inner_vector_raw(&self, f: &SpectralVector, g: &SpectralVector) -> f64 {
        self.inner_raw(&f.x, &g.x) + self.inner_raw(&f.y, &g.y)
    }

    /// `⟨f, u⟩` for a general field and a solenoidal one.
    pub fn pair_with_velocity(&self, f: &SpectralVector, u: &VectorField) -> Result<f64> {
        Ok(self.inner_vector_raw(f, &self.velocity_components(u)?))
    }

    /// `‖φ‖_H`
    pub fn norm_h(&self, phi: &ScalarField) -> f64 {
        self.weighted_sq(phi.coefficients(), |_| 1.0).sqrt()
    }

    /// `‖∇φ‖_H`
    pub fn norm_grad(&self, phi: &ScalarField) -> f64 {
        self.weighted_sq(phi.coefficients(), |i| self.eigenvalue(i)).sqrt()
    }

    /// `‖Δφ‖_H`
    pub fn norm_laplacian(&self, phi: &ScalarField) -> f64 {
        self.weighted_sq(phi.coefficients(), |i| self.eigenvalue(i).powi(2)).sqrt()
    }

    /// `‖φ‖²_{V₁} = ‖φ‖² + ‖∇φ‖²`
    pub fn norm_v1(&self, phi: &ScalarField) -> f64 {
        self.weighted_sq(phi.coefficients(), |i| 1.0 + self.eigenvalue(i)).sqrt()
    }

    /// `‖φ‖²_{V₂} = ‖φ‖² + ‖∇φ‖² + ‖Δφ‖²`
    pub fn norm_v2(&self, phi: &ScalarField) -> f64 {
        self.weighted_sq(phi.coefficients(), |i| {
            let a = self.eigenvalue(i);
            1.0 + a + a * a
        })
        .sqrt()
    }

    /// `‖u‖_{H_σ}`
    pub fn norm_h_sigma(&self, u: &VectorField) -> f64 {
        self.weighted_sq(u.coefficients(), |_| 1.0).sqrt()
    }

    /// `‖u‖_{V_σ} = ‖∇u‖`
    pub fn norm_v_sigma(&self, u: &VectorField) -> f64 {
        self.weighted_sq(u.coefficients(), |i| self.eigenvalue(i)).sqrt()
    }

    /// `‖u‖_{V*_σ} = ‖∇A⁻¹u‖`
    pub fn norm_v_sigma_dual(&self, u: &VectorField) -> f64 {
        self.weighted_sq(u.coefficients(), |i| {
            let b = self.eigenvalue(i);
            if b > 0.0 {
                1.0 / b
            } else {
                0.0
            }
        })
        .sqrt()
    }

    /// Grid quadrature of `‖∇f‖²` for a general vector field, summed over
    /// components.
    fn quadrature_grad_sq(&self, f: &SpectralVector) -> f64 {
        let mut total = 0.0;
        for comp in [&f.x, &f.y] {
            let g = self.vector_to_physical(&self.gradient(&ScalarField::from_coefficients(comp.clone())));
            total += self.grid_inner(&g.x, &g.x) + self.grid_inner(&g.y, &g.y);
        }
        total
    }

    /// Every norm evaluated by physical-space quadrature instead of the
    /// diagonal spectral formulas. Derivatives are still spectral.
    pub fn quadrature_scalar_norms(&self, phi: &ScalarField) -> ScalarNorms {
        let p = self.scalar_to_physical(phi);
        let g = self.vector_to_physical(&self.gradient(phi));
        let l = self.scalar_to_physical(&self.laplacian(phi));
        let h2 = self.grid_inner(&p, &p);
        let g2 = self.grid_inner(&g.x, &g.x) + self.grid_inner(&g.y, &g.y);
        let l2 = self.grid_inner(&l, &l);
        ScalarNorms {
            h: h2.sqrt(),
            v1: (h2 + g2).sqrt(),
            v2: (h2 + g2 + l2).sqrt(),
        }
    }

    pub fn spectral_scalar_norms(&self, phi: &ScalarField) -> ScalarNorms {
        ScalarNorms {
            h: self.norm_h(phi),
            v1: self.norm_v1(phi),
            v2: self.norm_v2(phi),
        }
    }

    pub fn quadrature_velocity_norms(&self, u: &VectorField) -> Result<VelocityNorms> {
        let c = self.velocity_components(u)?;
        let p = self.vector_to_physical(&c);
        let h = (self.grid_inner(&p.x, &p.x) + self.grid_inner(&p.y, &p.y)).sqrt();
        let v = self.quadrature_grad_sq(&c).sqrt();
        let inv = self.velocity_components(&self.inverse_stokes(u)?)?;
        let dual = self.quadrature_grad_sq(&inv).sqrt();
        Ok(VelocityNorms { h, v, dual })
    }

    pub fn spectral_velocity_norms(&self, u: &VectorField) -> VelocityNorms {
        VelocityNorms {
            h: self.norm_h_sigma(u),
            v: self.norm_v_sigma(u),
            dual: self.norm_v_sigma_dual(u),
        }
    }
}

/// `H`, `V₁` and `V₂` norms of a scalar field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarNorms {
    pub h: f64,
    pub v1: f64,
    pub v2: f64,
}

/// `H_σ`, `V_σ` and `V*_σ` norms of a velocity field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityNorms {
    pub h: f64,
    pub v: f64,
    pub dual: f64,
}
