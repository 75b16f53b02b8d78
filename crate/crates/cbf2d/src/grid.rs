//! Uniform MAC staggering of the unit square.
//!
//! The domain is always `[0,1] x [0,1]`, split into `nx * ny` cells of size
//! `hx * hy` with `hx = 1/nx`, `hy = 1/ny`.  Unknowns live on the classic
//! marker-and-cell sites:
//!
//! * x-velocity on vertical faces: `(i*hx, (j+1/2)*hy)`, `i = 0..=nx`, `j = 0..ny`
//! * y-velocity on horizontal faces: `((i+1/2)*hx, j*hy)`, `i = 0..nx`, `j = 0..=ny`
//! * scalars (pressure, divergence) at cell centres: `((i+1/2)*hx, (j+1/2)*hy)`
//! * stream functions at cell corners: `(i*hx, j*hy)`
//!
//! Faces with `i = 0, nx` (resp. `j = 0, ny`) lie on the boundary; the no-slip
//! condition pins the normal velocity there to exactly zero.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Cell counts and spacings of the staggered unit-square mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid {
    /// Coarsest resolution with enough interior sites for every stencil.
    pub const MIN_CELLS: usize = 8;

    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < Self::MIN_CELLS || ny < Self::MIN_CELLS {
            return Err(Error::invalid(
                "grid",
                format!(
                    "need at least {} cells per direction, got {}x{}",
                    Self::MIN_CELLS,
                    nx,
                    ny
                ),
            ));
        }
        Ok(Grid {
            nx,
            ny,
            hx: 1.0 / nx as f64,
            hy: 1.0 / ny as f64,
        })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.hx
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Quadrature weight of one sample site.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    #[inline]
    pub fn min_spacing(&self) -> f64 {
        self.hx.min(self.hy)
    }

    /// Location of the x-velocity site `(i, j)`.
    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx, (j as f64 + 0.5) * self.hy)
    }

    /// Location of the y-velocity site `(i, j)`.
    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, j as f64 * self.hy)
    }

    /// Location of the cell centre `(i, j)`.
    #[inline]
    pub fn centre(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    /// Location of the cell corner `(i, j)`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx, j as f64 * self.hy)
    }

    pub(crate) fn expect_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected_nx: self.nx,
                expected_ny: self.ny,
                found_nx: other.nx,
                found_ny: other.ny,
            })
        }
    }
}
