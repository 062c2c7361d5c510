use num_complex::Complex64;

macro_rules! coefficient_field {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            coeffs: Vec<Complex64>,
        }

        impl $name {
            pub fn from_coefficients(coeffs: Vec<Complex64>) -> Self {
                Self { coeffs }
            }

            pub fn zeros(len: usize) -> Self {
                Self { coeffs: vec![Complex64::new(0.0, 0.0); len] }
            }

            pub fn coefficients(&self) -> &[Complex64] {
                &self.coeffs
            }

            pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
                &mut self.coeffs
            }

            pub fn into_coefficients(self) -> Vec<Complex64> {
                self.coeffs
            }

            pub fn len(&self) -> usize {
                self.coeffs.len()
            }

            pub fn is_empty(&self) -> bool {
                self.coeffs.is_empty()
            }

            pub fn scaled(&self, s: f64) -> Self {
                Self { coeffs: self.coeffs.iter().map(|z| z * s).collect() }
            }

            /// `self + s·other`
            pub fn axpy(&self, s: f64, other: &Self) -> Self {
                Self {
                    coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b * s).collect(),
                }
            }

            pub fn sub(&self, other: &Self) -> Self {
                self.axpy(-1.0, other)
            }

            pub fn add_assign_scaled(&mut self, s: f64, other: &Self) {
                for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
                    *a += b * s;
                }
            }

            /// Largest coefficient modulus.
            pub fn max_abs(&self) -> f64 {
                self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
            }

            pub fn is_finite(&self) -> bool {
                self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            }
        }
    };
}

coefficient_field!(
    /// Scalar field expanded in the Laplace eigenbasis.
    ScalarField
);

coefficient_field!(
    /// Solenoidal velocity: one coefficient per wave-vector along the
    /// divergence-free polarization. Solenoidal by construction.
    VectorField
);

/// General (not necessarily solenoidal) vector field as two scalar
/// coefficient arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl SpectralVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            x: vec![Complex64::new(0.0, 0.0); len],
            y: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let f = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(p, q)| p + q * s).collect();
        Self {
            x: f(&self.x, &other.x),
            y: f(&self.y, &other.y),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            x: self.x.iter().map(|z| z * s).collect(),
            y: self.y.iter().map(|z| z * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).map(|z| z.norm()).fold(0.0, f64::max)
    }
}
