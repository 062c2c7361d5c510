//! Fourier–Galerkin realization of the function spaces and operators.
//!
//! Scalar fields are expanded in eigenfunctions of the Laplacian, velocity
//! fields in the divergence-free eigenfunctions of the Stokes operator. Two
//! boundary realizations exist:
//!
//! * [`BoundaryMode::Periodic`]: the torus `[0, L)²`. Every operator is
//!   diagonal or a dealiased pseudospectral product. This is the only mode in
//!   which a velocity field can be carried.
//! * [`BoundaryMode::NeumannCosine`]: the square `[0, L]²` with homogeneous
//!   Neumann conditions, realized as the even subspace of the doubled torus
//!   `[0, 2L)²`. Scalar-only.
//!
//! # Coefficient convention
//!
//! Coefficients live on the full `m × m` FFT grid of the computational torus
//! (`m = n` periodic, `m = 2n` Neumann), in FFT order, and are the expansion
//! coefficients against the orthonormal modes `e^{ik·x}/√|Oc|`. Entries
//! outside the retained set (`|k_x|, |k_y| ≤ K`) are zero. The physical
//! `L²` inner product is `w · Re Σ conj(a_k) b_k`, with `w = 1` on the torus
//! and `w = 1/4` for the Neumann square.
//!
//! A velocity field stores one coefficient per wave-vector along the
//! polarization `p_k = i k⊥/|k|`, `k⊥ = (−k_y, k_x)`. The factor `i` makes real
//! fields Hermitian: `a_{−k} = conj(a_k)`.

mod fft;
mod field;
mod ops;
mod random;
pub mod snapshot;

pub use fft::Fft2;
pub use field::{ScalarField, SpectralVector, VectorField};
pub use ops::{PhysicalVector, ScalarNorms, VelocityNorms};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary realization of the spatial domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Periodic,
    NeumannCosine,
}

/// Construction parameters of a [`SpectralBasis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    /// Physical grid points per dimension (`N`).
    pub n: usize,
    /// Side length `L` of the physical domain.
    pub length: f64,
    pub boundary: BoundaryMode,
    /// Fraction of the Nyquist band that is retained; `2/3` gives the
    /// classical dealiasing rule.
    pub dealias_fraction: f64,
    /// Whether a velocity field is coupled to the phase field.
    pub velocity_coupling: bool,
}

impl BasisConfig {
    pub fn periodic(n: usize, length: f64) -> Self {
        Self {
            n,
            length,
            boundary: BoundaryMode::Periodic,
            dealias_fraction: 2.0 / 3.0,
            velocity_coupling: true,
        }
    }

    pub fn neumann(n: usize, length: f64) -> Self {
        Self {
            n,
            length,
            boundary: BoundaryMode::NeumannCosine,
            dealias_fraction: 2.0 / 3.0,
            velocity_coupling: false,
        }
    }
}

/// Kind of a real orthonormal basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealModeKind {
    Constant,
    Cos,
    Sin,
}

/// One real orthonormal basis function, identified by its wave-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealMode {
    /// Integer wave-vector `(k_x, k_y)` on the computational torus. For the
    /// Neumann basis these are the cosine indices `(j, m) ≥ 0`.
    pub k: (i64, i64),
    pub kind: RealModeKind,
    pub eigenvalue: f64,
}

/// Eigenbasis of the scalar Laplacian and the Stokes operator.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    config: BasisConfig,
    /// Computational grid size per dimension.
    m: usize,
    /// Side of the computational torus.
    comp_length: f64,
    cutoff: usize,
    fft: Fft2,
    /// Physical wave numbers in FFT order.
    wavenumbers: Vec<f64>,
    /// Integer wave numbers in FFT order.
    indices: Vec<i64>,
    /// Per-grid-entry retained flag.
    retained: Vec<bool>,
    /// `|k|²` per grid entry (zero outside the retained set).
    alpha: Vec<f64>,
    scalar_modes: Vec<RealMode>,
    stokes_modes: Vec<RealMode>,
}

impl SpectralBasis {
    pub fn new(config: BasisConfig) -> Result<Self> {
        let BasisConfig {
            n,
            length,
            boundary,
            dealias_fraction,
            velocity_coupling,
        } = config;
        if n < 4 || n % 2 != 0 {
            return Err(Error::param("n", format!("grid size must be even and at least 4, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::param("length", format!("must be positive, got {length}")));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::param("dealias_fraction", format!("must lie in (0, 1], got {dealias_fraction}")));
        }
        if boundary == BoundaryMode::NeumannCosine && velocity_coupling {
            return Err(Error::param(
                "boundary",
                "the Neumann cosine basis carries no Stokes eigenfunctions; use the periodic basis for the coupled system",
            ));
        }
        let (m, comp_length) = match boundary {
            BoundaryMode::Periodic => (n, length),
            BoundaryMode::NeumannCosine => (2 * n, 2.0 * length),
        };
        let half = m / 2;
        // Strictly inside the band, so that `3K < m` under the 2/3 rule and
        // quadratic products never alias back onto retained modes.
        let cutoff = ((dealias_fraction * half as f64).ceil() as usize).saturating_sub(1).clamp(1, half - 1);

        let indices: Vec<i64> = (0..m)
            .map(|i| if i <= half { i as i64 } else { i as i64 - m as i64 })
            .collect();
        let k0 = 2.0 * PI / comp_length;
        let wavenumbers: Vec<f64> = indices.iter().map(|&i| k0 * i as f64).collect();

        let mut retained = vec![false; m * m];
        let mut alpha = vec![0.0; m * m];
        for iy in 0..m {
            for ix in 0..m {
                let (kx, ky) = (indices[ix], indices[iy]);
                if kx.unsigned_abs() as usize <= cutoff && ky.unsigned_abs() as usize <= cutoff {
                    retained[iy * m + ix] = true;
                    alpha[iy * m + ix] = wavenumbers[ix].powi(2) + wavenumbers[iy].powi(2);
                }
            }
        }

        let k_int = cutoff as i64;
        let eig = |kx: i64, ky: i64| (k0 * kx as f64).powi(2) + (k0 * ky as f64).powi(2);
        let mut scalar_modes = Vec::new();
        let mut stokes_modes = Vec::new();
        match boundary {
            BoundaryMode::Periodic => {
                scalar_modes.push(RealMode {
                    k: (0, 0),
                    kind: RealModeKind::Constant,
                    eigenvalue: 0.0,
                });
                for ky in 0..=k_int {
                    for kx in -k_int..=k_int {
                        if ky == 0 && kx <= 0 {
                            continue;
                        }
                        for kind in [RealModeKind::Cos, RealModeKind::Sin] {
                            let mode = RealMode {
                                k: (kx, ky),
                                kind,
                                eigenvalue: eig(kx, ky),
                            };
                            scalar_modes.push(mode);
                            if velocity_coupling {
                                stokes_modes.push(mode);
                            }
                        }
                    }
                }
            }
            BoundaryMode::NeumannCosine => {
                for my in 0..=k_int {
                    for jx in 0..=k_int {
                        scalar_modes.push(RealMode {
                            k: (jx, my),
                            kind: if jx == 0 && my == 0 { RealModeKind::Constant } else { RealModeKind::Cos },
                            eigenvalue: eig(jx, my),
                        });
                    }
                }
            }
        }
        let by_eigenvalue = |a: &RealMode, b: &RealMode| {
            a.eigenvalue
                .total_cmp(&b.eigenvalue)
                .then(a.k.1.cmp(&b.k.1))
                .then(a.k.0.cmp(&b.k.0))
                .then((a.kind as u8).cmp(&(b.kind as u8)))
        };
        scalar_modes.sort_by(by_eigenvalue);
        stokes_modes.sort_by(by_eigenvalue);

        Ok(Self {
            config,
            m,
            comp_length,
            cutoff,
            fft: Fft2::new(m),
            wavenumbers,
            indices,
            retained,
            alpha,
            scalar_modes,
            stokes_modes,
        })
    }

    pub fn config(&self) -> &BasisConfig {
        &self.config
    }

    pub fn boundary(&self) -> BoundaryMode {
        self.config.boundary
    }

    pub fn has_velocity(&self) -> bool {
        self.config.velocity_coupling
    }

    /// Physical grid points per dimension.
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn length(&self) -> f64 {
        self.config.length
    }

    /// Computational grid points per dimension.
    pub fn grid(&self) -> usize {
        self.m
    }

    /// Number of entries in a coefficient array.
    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Largest retained integer wave number per dimension.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Lebesgue measure `|O|` of the physical domain.
    pub fn area(&self) -> f64 {
        self.config.length * self.config.length
    }

    fn comp_area(&self) -> f64 {
        self.comp_length * self.comp_length
    }

    /// Ratio between the physical and computational-torus `L²` products.
    pub fn measure(&self) -> f64 {
        match self.config.boundary {
            BoundaryMode::Periodic => 1.0,
            BoundaryMode::NeumannCosine => 0.25,
        }
    }

    /// Grid spacing of the computational torus.
    pub fn spacing(&self) -> f64 {
        self.comp_length / self.m as f64
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// Integer wave-vector of a grid entry.
    pub fn wave_index(&self, idx: usize) -> (i64, i64) {
        (self.indices[idx % self.m], self.indices[idx / self.m])
    }

    /// Physical wave-vector of a grid entry.
    pub fn wave_vector(&self, idx: usize) -> (f64, f64) {
        (self.wavenumbers[idx % self.m], self.wavenumbers[idx / self.m])
    }

    /// Grid entry of an integer wave-vector.
    pub fn entry(&self, kx: i64, ky: i64) -> usize {
        let m = self.m as i64;
        let wrap = |k: i64| k.rem_euclid(m) as usize;
        wrap(ky) * self.m + wrap(kx)
    }

    pub fn is_retained(&self, idx: usize) -> bool {
        self.retained[idx]
    }

    /// `|k|²` of a grid entry: the scalar eigenvalue `α`, which is also the
    /// Stokes eigenvalue `β` for `k ≠ 0`.
    pub fn eigenvalue(&self, idx: usize) -> f64 {
        self.alpha[idx]
    }

    /// Sorted eigenvalues `α_j` of the retained real scalar basis.
    pub fn scalar_eigenvalues(&self) -> Vec<f64> {
        self.scalar_modes.iter().map(|m| m.eigenvalue).collect()
    }

    /// Sorted eigenvalues `β_k` of the retained real Stokes basis.
    pub fn stokes_eigenvalues(&self) -> Vec<f64> {
        self.stokes_modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn scalar_modes(&self) -> &[RealMode] {
        &self.scalar_modes
    }

    pub fn stokes_modes(&self) -> &[RealMode] {
        &self.stokes_modes
    }

    /// Retained entries in snapshot order: `k_y` ascending, then `k_x`
    /// ascending, both over `−K..=K`.
    pub fn retained_entries(&self) -> Vec<usize> {
        let k = self.cutoff as i64;
        let mut out = Vec::with_capacity((2 * self.cutoff + 1).pow(2));
        for ky in -k..=k {
            for kx in -k..=k {
                out.push(self.entry(kx, ky));
            }
        }
        out
    }

    /// Physical coordinates of computational grid point `(ix, iy)`.
    pub fn grid_point(&self, ix: usize, iy: usize) -> (f64, f64) {
        let h = self.spacing();
        (ix as f64 * h, iy as f64 * h)
    }

    /// Coordinate inside the physical domain that a computational grid point
    /// represents (folds the even reflection of the Neumann realization).
    pub fn physical_coordinate(&self, ix: usize, iy: usize) -> (f64, f64) {
        let (x, y) = self.grid_point(ix, iy);
        match self.config.boundary {
            BoundaryMode::Periodic => (x, y),
            BoundaryMode::NeumannCosine => {
                let l = self.config.length;
                let fold = |t: f64| if t > l { 2.0 * l - t } else { t };
                (fold(x), fold(y))
            }
        }
    }

    pub(crate) fn zeros(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::BasisMismatch(format!(
                "coefficient array of length {len} on a basis with {} entries",
                self.len()
            )));
        }
        Ok(())
    }

    /// Scalar field of a real orthonormal basis function.
    pub fn scalar_mode(&self, mode: &RealMode) -> ScalarField {
        let mut c = self.zeros();
        let (kx, ky) = mode.k;
        match self.config.boundary {
            BoundaryMode::Periodic => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                match mode.kind {
                    RealModeKind::Constant => c[0] = Complex64::new(1.0, 0.0),
                    RealModeKind::Cos => {
                        c[self.entry(kx, ky)] = Complex64::new(s, 0.0);
                        c[self.entry(-kx, -ky)] = Complex64::new(s, 0.0);
                    }
                    RealModeKind::Sin => {
                        c[self.entry(kx, ky)] = Complex64::new(0.0, -s);
                        c[self.entry(-kx, -ky)] = Complex64::new(0.0, s);
                    }
                }
            }
            BoundaryMode::NeumannCosine => {
                // n_j n_m cos(jπx/L) cos(mπy/L) with n_0 = 1/√L, n_j = √(2/L),
                // expressed on the doubled torus. Normalised below.
                let mut count = 0usize;
                let mut targets = Vec::new();
                for sx in [1i64, -1] {
                    for sy in [1i64, -1] {
                        let e = self.entry(sx * kx, sy * ky);
                        if !targets.contains(&e) {
                            targets.push(e);
                            count += 1;
                        }
                    }
                }
                // w Σ|c|² = 1 with equal entries.
                let value = (1.0 / (self.measure() * count as f64)).sqrt();
                for e in targets {
                    c[e] = Complex64::new(value, 0.0);
                }
            }
        }
        ScalarField::from_coefficients(c)
    }

    /// Velocity field of a real orthonormal Stokes eigenfunction.
    pub fn stokes_mode(&self, mode: &RealMode) -> Result<VectorField> {
        if !self.has_velocity() {
            return Err(Error::BasisMismatch("basis carries no velocity modes".into()));
        }
        let mut a = self.zeros();
        let (kx, ky) = mode.k;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match mode.kind {
            RealModeKind::Constant => {
                return Err(Error::BasisMismatch("the mean velocity mode is excluded".into()));
            }
            // (k⊥/|k|) √2 cos(k·x)/√|O|
            RealModeKind::Cos => {
                a[self.entry(kx, ky)] = Complex64::new(0.0, -s);
                a[self.entry(-kx, -ky)] = Complex64::new(0.0, s);
            }
            // (k⊥/|k|) √2 sin(k·x)/√|O|
            RealModeKind::Sin => {
                a[self.entry(kx, ky)] = Complex64::new(-s, 0.0);
                a[self.entry(-kx, -ky)] = Complex64::new(-s, 0.0);
            }
        }
        Ok(VectorField::from_coefficients(a))
    }

    /// Polarization vector `p_k = i k⊥/|k|` of a grid entry (zero for `k = 0`).
    pub fn polarization(&self, idx: usize) -> (Complex64, Complex64) {
        let (kx, ky) = self.wave_vector(idx);
        let norm = (kx * kx + ky * ky).sqrt();
        if norm == 0.0 {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        (Complex64::new(0.0, -ky / norm), Complex64::new(0.0, kx / norm))
    }

    /// Real-space polarization direction `k⊥/|k|`.
    pub fn polarization_direction(&self, idx: usize) -> (f64, f64) {
        let (px, py) = self.polarization(idx);
        (px.im, py.im)
    }

    /// Zeroes every coefficient outside the retained set; for the Neumann
    /// basis also restores the even symmetry.
    pub(crate) fn truncate(&self, c: &mut [Complex64]) {
        for (v, &keep) in c.iter_mut().zip(&self.retained) {
            if !keep {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        if self.config.boundary == BoundaryMode::NeumannCosine {
            let k = self.cutoff as i64;
            for ky in 0..=k {
                for kx in 0..=k {
                    let es = [
                        self.entry(kx, ky),
                        self.entry(-kx, ky),
                        self.entry(kx, -ky),
                        self.entry(-kx, -ky),
                    ];
                    let mean: f64 = es.iter().map(|&e| c[e].re).sum::<f64>() / 4.0;
                    for e in es {
                        c[e] = Complex64::new(mean, 0.0);
                    }
                }
            }
        }
    }

    /// Physical values on the computational grid.
    pub fn to_physical(&self, c: &[Complex64]) -> Vec<f64> {
        let mut buf = c.to_vec();
        self.fft.inverse(&mut buf);
        let scale = 1.0 / self.comp_area().sqrt();
        buf.iter().map(|z| z.re * scale).collect()
    }

    /// Galerkin projection of grid values onto the retained modes (discrete
    /// transform followed by truncation).
    pub fn from_physical(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        let scale = self.comp_area().sqrt() / (self.m * self.m) as f64;
        for z in &mut buf {
            *z *= scale;
        }
        self.truncate(&mut buf);
        buf
    }

    /// Physical-domain `L²` inner product of two coefficient arrays.
    pub(crate) fn inner_raw(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        self.measure() * a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
    }

    /// Weighted sum `w Σ weight(k) |c_k|²`.
    pub(crate) fn weighted_sq(&self, c: &[Complex64], weight: impl Fn(usize) -> f64) -> f64 {
        self.measure() * c.iter().enumerate().map(|(i, z)| weight(i) * z.norm_sqr()).sum::<f64>()
    }

    /// Quadrature `w · h² Σ f g` over the computational grid.
    pub fn grid_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let h = self.spacing();
        self.measure() * h * h * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Quadrature of `∫_O f`.
    pub fn grid_integral(&self, f: &[f64]) -> f64 {
        let h = self.spacing();
        self.measure() * h * h * f.iter().sum::<f64>()
    }

    /// Scalar field sampled from a function of the physical coordinates
    /// and projected onto the retained modes.
    pub fn project_scalar(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let m = self.m;
        let mut values = vec![0.0; m * m];
        for iy in 0..m {
            for ix in 0..m {
                let (x, y) = self.physical_coordinate(ix, iy);
                values[iy * m + ix] = f(x, y);
            }
        }
        ScalarField::from_coefficients(self.from_physical(&values))
    }

    /// Leray projection of a velocity sampled from a function of the physical
    /// coordinates.
    pub fn project_vector(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Result<VectorField> {
        let m = self.m;
        let mut vx = vec![0.0; m * m];
        let mut vy = vec![0.0; m * m];
        for iy in 0..m {
            for ix in 0..m {
                let (x, y) = self.grid_point(ix, iy);
                let (a, b) = f(x, y);
                vx[iy * m + ix] = a;
                vy[iy * m + ix] = b;
            }
        }
        let v = SpectralVector {
            x: self.from_physical(&vx),
            y: self.from_physical(&vy),
        };
        self.leray_project(&v)
    }

    /// Smallest non-zero eigenvalue (`β_1`).
    pub fn first_eigenvalue(&self) -> f64 {
        let k0 = 2.0 * PI / self.comp_length;
        k0 * k0
    }
}
