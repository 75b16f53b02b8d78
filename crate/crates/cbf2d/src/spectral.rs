//! Direct elliptic solves by tensor-product eigendecomposition.
//!
//! Every implicit solve in this crate reduces to a symmetric second-difference
//! operator along each axis, and those operators are diagonalized exactly by
//! discrete sine/cosine bases:
//!
//! * cell-centred with zero-flux walls  -> shifted cosines (pressure Poisson);
//! * node-centred with pinned endpoints -> sines (velocity along its own axis);
//! * cell-centred with reflected ghosts -> shifted sines (velocity across).
//!
//! A 2D solve is two small dense transforms per axis, an elementwise divide by
//! the eigenvalue sums, and the inverse transforms.  At the resolutions this
//! crate targets that is both faster than iterating and exact to rounding,
//! which the projection contract (residual <= 1e-10) leans on.

use crate::error::Result;
use crate::field::{ScalarField, VelocityField};
use crate::grid::Grid;
use ndarray::{s, Array2};
use std::f64::consts::PI;

/// Orthonormal eigenbasis of a 1D symmetric second-difference operator.
///
/// `modes` holds one eigenvector per row, sampled at the operator's sites, so
/// `modes * modes^T = I`; `eigs[k]` is the eigenvalue of row `k` (all <= 0).
#[derive(Clone, Debug)]
struct Basis1d {
    modes: Array2<f64>,
    eigs: Vec<f64>,
}

impl Basis1d {
    /// Cell-centred operator with zero-flux walls on `n` cells of width `h`:
    /// eigenvectors `cos(pi k (j+1/2)/n)`, `k = 0..n`.
    fn neumann_cells(n: usize, h: f64) -> Basis1d {
        let mut modes = Array2::zeros((n, n));
        let mut eigs = Vec::with_capacity(n);
        for k in 0..n {
            let norm = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for j in 0..n {
                modes[[k, j]] = norm * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
            }
            let s = (PI * k as f64 / (2.0 * n as f64)).sin();
            eigs.push(-4.0 / (h * h) * s * s);
        }
        Basis1d { modes, eigs }
    }

    /// Node-centred operator with pinned endpoints: interior nodes
    /// `i = 1..n`, eigenvectors `sin(pi k i/n)`, `k = 1..n`.
    fn dirichlet_nodes(n: usize, h: f64) -> Basis1d {
        let m = n - 1;
        let mut modes = Array2::zeros((m, m));
        let mut eigs = Vec::with_capacity(m);
        let norm = (2.0 / n as f64).sqrt();
        for k in 1..n {
            for i in 1..n {
                modes[[k - 1, i - 1]] = norm * (PI * k as f64 * i as f64 / n as f64).sin();
            }
            let s = (PI * k as f64 / (2.0 * n as f64)).sin();
            eigs.push(-4.0 / (h * h) * s * s);
        }
        Basis1d { modes, eigs }
    }

    /// Cell-centred operator with reflected ghosts (`s[-1] = -s[0]`,
    /// `s[n] = -s[n-1]`), the tangential no-slip closure: eigenvectors
    /// `sin(pi k (j+1/2)/n)`, `k = 1..=n`.
    fn reflect_cells(n: usize, h: f64) -> Basis1d {
        let mut modes = Array2::zeros((n, n));
        let mut eigs = Vec::with_capacity(n);
        for k in 1..=n {
            let norm = if k == n {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for j in 0..n {
                modes[[k - 1, j]] = norm * (PI * k as f64 * (j as f64 + 0.5) / n as f64).sin();
            }
            let s = (PI * k as f64 / (2.0 * n as f64)).sin();
            eigs.push(-4.0 / (h * h) * s * s);
        }
        Basis1d { modes, eigs }
    }
}

/// Solves `div grad phi = rhs` on cell centres with zero-flux walls.
///
/// The operator's null space (constants) is removed by zeroing the mean mode,
/// so the returned potential is mean-free and the solve is exact on the
/// mean-free part of `rhs`.
#[derive(Clone, Debug)]
pub struct PoissonNeumann {
    grid: Grid,
    bx: Basis1d,
    by: Basis1d,
}

impl PoissonNeumann {
    pub fn new(grid: Grid) -> Self {
        PoissonNeumann {
            grid,
            bx: Basis1d::neumann_cells(grid.nx(), grid.hx()),
            by: Basis1d::neumann_cells(grid.ny(), grid.hy()),
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn solve(&self, rhs: &ScalarField) -> Result<ScalarField> {
        self.grid.expect_same(&rhs.grid())?;
        let mut hat = self.bx.modes.dot(rhs.values()).dot(&self.by.modes.t());
        for (k, &lx) in self.bx.eigs.iter().enumerate() {
            for (l, &ly) in self.by.eigs.iter().enumerate() {
                let den = lx + ly;
                hat[[k, l]] = if k == 0 && l == 0 { 0.0 } else { hat[[k, l]] / den };
            }
        }
        let phi = self.bx.modes.t().dot(&hat).dot(&self.by.modes);
        Ok(ScalarField::from_values(self.grid, phi))
    }
}

/// Solves `(c0 I - cd Lap) u = rhs` componentwise on the velocity faces, with
/// pinned boundary-normal values and reflected tangential ghosts — the
/// implicit part of the time step.
#[derive(Clone, Debug)]
pub struct FaceHelmholtz {
    grid: Grid,
    c0: f64,
    cd: f64,
    // ux block (nx-1, ny): Dirichlet along x, reflection along y.
    ux_bx: Basis1d,
    ux_by: Basis1d,
    // uy block (nx, ny-1): reflection along x, Dirichlet along y.
    uy_bx: Basis1d,
    uy_by: Basis1d,
}

impl FaceHelmholtz {
    /// `c0` must be positive; `cd` non-negative (identity plus dissipation).
    pub fn new(grid: Grid, c0: f64, cd: f64) -> Self {
        debug_assert!(c0 > 0.0 && cd >= 0.0);
        FaceHelmholtz {
            grid,
            c0,
            cd,
            ux_bx: Basis1d::dirichlet_nodes(grid.nx(), grid.hx()),
            ux_by: Basis1d::reflect_cells(grid.ny(), grid.hy()),
            uy_bx: Basis1d::reflect_cells(grid.nx(), grid.hx()),
            uy_by: Basis1d::dirichlet_nodes(grid.ny(), grid.hy()),
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn solve_block(rhs: Array2<f64>, bx: &Basis1d, by: &Basis1d, c0: f64, cd: f64) -> Array2<f64> {
        let mut hat = bx.modes.dot(&rhs).dot(&by.modes.t());
        for (k, &lx) in bx.eigs.iter().enumerate() {
            for (l, &ly) in by.eigs.iter().enumerate() {
                hat[[k, l]] /= c0 - cd * (lx + ly);
            }
        }
        bx.modes.t().dot(&hat).dot(&by.modes)
    }

    pub fn solve(&self, rhs: &VelocityField) -> Result<VelocityField> {
        self.grid.expect_same(&rhs.grid())?;
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut out = VelocityField::zeros(self.grid);

        let bx_block = rhs.ux().slice(s![1..nx, ..]).to_owned();
        let sol = Self::solve_block(bx_block, &self.ux_bx, &self.ux_by, self.c0, self.cd);
        out.ux_mut().slice_mut(s![1..nx, ..]).assign(&sol);

        let by_block = rhs.uy().slice(s![.., 1..ny]).to_owned();
        let sol = Self::solve_block(by_block, &self.uy_bx, &self.uy_by, self.c0, self.cd);
        out.uy_mut().slice_mut(s![.., 1..ny]).assign(&sol);

        Ok(out)
    }
}
