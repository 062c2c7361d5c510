use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{BoundaryMode, ScalarField, SpectralBasis, SpectralVector, VectorField};
use crate::error::Result;

impl SpectralBasis {
    /// Hermitian-symmetric Gaussian coefficients with spectral decay
    /// `amplitude·(1 + |k|²)^{−decay/2}` on the retained set.
    fn random_coefficients<R: Rng + ?Sized>(&self, rng: &mut R, amplitude: f64, decay: f64) -> Vec<Complex64> {
        let mut raw = self.zeros();
        for (idx, z) in raw.iter_mut().enumerate() {
            if self.is_retained(idx) {
                let w = amplitude * (1.0 + self.eigenvalue(idx)).powf(-decay / 2.0);
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z = Complex64::new(re, im) * w;
            }
        }
        let mut out = self.zeros();
        for (idx, z) in out.iter_mut().enumerate() {
            let (kx, ky) = self.wave_index(idx);
            let partner = self.entry(-kx, -ky);
            *z = (raw[idx] + raw[partner].conj()) * 0.5;
        }
        if self.boundary() == BoundaryMode::NeumannCosine {
            self.truncate(&mut out);
        }
        out
    }

    /// Random real scalar field on the retained modes.
    pub fn random_scalar<R: Rng + ?Sized>(&self, rng: &mut R, amplitude: f64, decay: f64) -> ScalarField {
        ScalarField::from_coefficients(self.random_coefficients(rng, amplitude, decay))
    }

    /// Random real solenoidal velocity with zero mean.
    pub fn random_velocity<R: Rng + ?Sized>(&self, rng: &mut R, amplitude: f64, decay: f64) -> Result<VectorField> {
        let mut a = self.random_coefficients(rng, amplitude, decay);
        a[0] = Complex64::new(0.0, 0.0);
        let u = VectorField::from_coefficients(a);
        self.velocity_components(&u)?;
        Ok(u)
    }

    /// Random real vector field with both solenoidal and gradient content.
    pub fn random_vector<R: Rng + ?Sized>(&self, rng: &mut R, amplitude: f64, decay: f64) -> SpectralVector {
        SpectralVector {
            x: self.random_coefficients(rng, amplitude, decay),
            y: self.random_coefficients(rng, amplitude, decay),
        }
    }
}
