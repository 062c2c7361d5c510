//! Binary persistence of Galerkin coefficients.
//!
//! Layout (all little-endian):
//!
//! | field      | type  | notes                                        |
//! |------------|-------|----------------------------------------------|
//! | magic      | 4 B   | `b"ACNS"`                                    |
//! | version    | u32   | currently `1`                                |
//! | n          | u32   | physical grid points per dimension           |
//! | length     | f64   | side length `L`                              |
//! | flags      | u32   | bit 0 Neumann, bit 1 velocity, bit 2 noise   |
//! | cutoff     | u32   | retained band `K`                            |
//! | t          | f64   | time                                         |
//! | lambda     | f64   | regularization parameter                     |
//! | step       | u64   | step index                                   |
//! | n_modes    | u32   | `(2K+1)²`                                    |
//!
//! A field record (bit 2 clear) continues with the velocity array (if bit 1
//! is set), the phase array `b` and the chemical potential `c`. Each array is
//! `n_modes` pairs `(re, im)` of f64 in the order `k_y = −K..=K`, and within
//! each `k_y`, `k_x = −K..=K`.
//!
//! A noise record (bit 2 set) reuses the header, with `n_modes` holding `K₁`,
//! followed by `K₂` as u32, `dt` as f64, then the `K₁ + K₂` increments as f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{BoundaryMode, ScalarField, SpectralBasis, VectorField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ACNS";
pub const VERSION: u32 = 1;

const FLAG_NEUMANN: u32 = 1;
const FLAG_VELOCITY: u32 = 2;
const FLAG_NOISE: u32 = 4;

/// Common header of every record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub n: u32,
    pub length: f64,
    pub boundary: BoundaryMode,
    pub velocity: bool,
    pub cutoff: u32,
    pub t: f64,
    pub lambda: f64,
    pub step: u64,
}

impl Header {
    pub fn for_basis(basis: &SpectralBasis, t: f64, lambda: f64, step: u64) -> Self {
        Self {
            n: basis.n() as u32,
            length: basis.length(),
            boundary: basis.boundary(),
            velocity: basis.has_velocity(),
            cutoff: basis.cutoff() as u32,
            t,
            lambda,
            step,
        }
    }

    fn flags(&self, noise: bool) -> u32 {
        let mut f = 0;
        if self.boundary == BoundaryMode::NeumannCosine {
            f |= FLAG_NEUMANN;
        }
        if self.velocity {
            f |= FLAG_VELOCITY;
        }
        if noise {
            f |= FLAG_NOISE;
        }
        f
    }

    /// Whether a basis can hold the data described by this header.
    pub fn check_basis(&self, basis: &SpectralBasis) -> Result<()> {
        let matches = self.n as usize == basis.n()
            && self.length == basis.length()
            && self.boundary == basis.boundary()
            && self.velocity == basis.has_velocity()
            && self.cutoff as usize == basis.cutoff();
        if matches {
            Ok(())
        } else {
            Err(Error::BasisMismatch(format!(
                "snapshot (n={}, L={}, {:?}, velocity={}, K={}) does not fit basis (n={}, L={}, {:?}, velocity={}, K={})",
                self.n,
                self.length,
                self.boundary,
                self.velocity,
                self.cutoff,
                basis.n(),
                basis.length(),
                basis.boundary(),
                basis.has_velocity(),
                basis.cutoff()
            )))
        }
    }

    fn modes(&self) -> usize {
        (2 * self.cutoff as usize + 1).pow(2)
    }
}

/// Field record: header plus compact coefficient arrays in snapshot order.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: Header,
    pub a: Option<Vec<Complex64>>,
    pub b: Vec<Complex64>,
    pub c: Vec<Complex64>,
}

impl Snapshot {
    pub fn from_fields(
        basis: &SpectralBasis,
        header: Header,
        a: Option<&VectorField>,
        b: &ScalarField,
        c: &ScalarField,
    ) -> Result<Self> {
        header.check_basis(basis)?;
        if a.is_some() != header.velocity {
            return Err(Error::BasisMismatch("velocity presence disagrees with the basis".into()));
        }
        let order = basis.retained_entries();
        let compact = |v: &[Complex64]| order.iter().map(|&e| v[e]).collect::<Vec<_>>();
        Ok(Self {
            header,
            a: a.map(|u| compact(u.coefficients())),
            b: compact(b.coefficients()),
            c: compact(c.coefficients()),
        })
    }

    /// Expands the compact arrays onto the full coefficient layout of `basis`.
    pub fn to_fields(&self, basis: &SpectralBasis) -> Result<(Option<VectorField>, ScalarField, ScalarField)> {
        self.header.check_basis(basis)?;
        let order = basis.retained_entries();
        let expand = |v: &[Complex64]| {
            let mut full = basis.zeros();
            for (&e, &z) in order.iter().zip(v) {
                full[e] = z;
            }
            full
        };
        Ok((
            self.a.as_ref().map(|a| VectorField::from_coefficients(expand(a))),
            ScalarField::from_coefficients(expand(&self.b)),
            ScalarField::from_coefficients(expand(&self.c)),
        ))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, &self.header, false, self.header.modes() as u32)?;
        if let Some(a) = &self.a {
            write_complex(w, a)?;
        }
        write_complex(w, &self.b)?;
        write_complex(w, &self.c)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let (header, noise, n_modes) = read_header(r)?;
        if noise {
            return Err(format_error("expected a field record, found a noise record"));
        }
        if n_modes as usize != header.modes() {
            return Err(format_error(&format!(
                "mode count {n_modes} disagrees with cutoff {}",
                header.cutoff
            )));
        }
        let n = n_modes as usize;
        let a = if header.velocity { Some(read_complex(r, n)?) } else { None };
        let b = read_complex(r, n)?;
        let c = read_complex(r, n)?;
        Ok(Self { header, a, b, c })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r).map_err(|e| match e {
            Error::Format { reason, .. } => Error::Format {
                path: Some(path.to_path_buf()),
                reason,
            },
            other => other,
        })
    }
}

/// Noise-increment record.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementRecord {
    pub header: Header,
    pub dt: f64,
    pub dw1: Vec<f64>,
    pub dw2: Vec<f64>,
}

impl IncrementRecord {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, &self.header, true, self.dw1.len() as u32)?;
        w.write_all(&(self.dw2.len() as u32).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for v in self.dw1.iter().chain(&self.dw2) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let (header, noise, k1) = read_header(r)?;
        if !noise {
            return Err(format_error("expected a noise record, found a field record"));
        }
        let k2 = read_u32(r)?;
        let dt = read_f64(r)?;
        let dw1 = (0..k1).map(|_| read_f64(r)).collect::<Result<_>>()?;
        let dw2 = (0..k2).map(|_| read_f64(r)).collect::<Result<_>>()?;
        Ok(Self { header, dt, dw1, dw2 })
    }
}

fn format_error(reason: &str) -> Error {
    Error::Format {
        path: None,
        reason: reason.into(),
    }
}

fn write_header(w: &mut impl Write, h: &Header, noise: bool, n_modes: u32) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&h.n.to_le_bytes())?;
    w.write_all(&h.length.to_le_bytes())?;
    w.write_all(&h.flags(noise).to_le_bytes())?;
    w.write_all(&h.cutoff.to_le_bytes())?;
    w.write_all(&h.t.to_le_bytes())?;
    w.write_all(&h.lambda.to_le_bytes())?;
    w.write_all(&h.step.to_le_bytes())?;
    w.write_all(&n_modes.to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<(Header, bool, u32)> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(format_error("bad magic"));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(format_error(&format!("unsupported version {version}")));
    }
    let n = read_u32(r)?;
    let length = read_f64(r)?;
    let flags = read_u32(r)?;
    if flags & !(FLAG_NEUMANN | FLAG_VELOCITY | FLAG_NOISE) != 0 {
        return Err(format_error(&format!("unknown flags {flags:#x}")));
    }
    let cutoff = read_u32(r)?;
    let t = read_f64(r)?;
    let lambda = read_f64(r)?;
    let step = read_u64(r)?;
    let n_modes = read_u32(r)?;
    let header = Header {
        n,
        length,
        boundary: if flags & FLAG_NEUMANN != 0 {
            BoundaryMode::NeumannCosine
        } else {
            BoundaryMode::Periodic
        },
        velocity: flags & FLAG_VELOCITY != 0,
        cutoff,
        t,
        lambda,
        step,
    };
    Ok((header, flags & FLAG_NOISE != 0, n_modes))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            format_error("truncated record")
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn write_complex(w: &mut impl Write, v: &[Complex64]) -> Result<()> {
    for z in v {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_complex(r: &mut impl Read, n: usize) -> Result<Vec<Complex64>> {
    (0..n)
        .map(|_| Ok(Complex64::new(read_f64(r)?, read_f64(r)?)))
        .collect()
}
