//! Discrete vector calculus on the staggered grid.
//!
//! The operators here form a compatible set: `gradient` is (minus) theexact
//! adjoint of `divergence` under [`inner_product`], the face Laplacian is
//! symmetric, and [`leray_project`] built from them is an orthogonal
//! projector.  The a priori estimate checks in this crate rely on those exact
//! discrete identities, not just on consistency with the continuum operators.
//!
//! Boundary closure: velocity components normal to a wall sit on the wall and
//! are pinned to zero; tangential components use reflected ghost values
//! (`u_ghost = -u_first`), which places the interpolated wall value at zero.
//!
//! Pointwise vector magnitudes on a staggered mesh need the transverse
//! component at the evaluation face; it is obtained by averaging the four
//! surrounding samples.  [`lp_norm`] weights each face's own component by the
//! interpolated magnitude, `sum M^(p-2) u_own^2 * area`, which makes `p = 2`
//! coincide exactly with the inner product and makes
//! `<forchheimer(v), v> = lp_norm(v, r+1)^(r+1)` an exact identity.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VelocityField};
use crate::spectral::PoissonNeumann;

/// Discrete `L2` pairing over all faces with uniform weight `hx*hy`
/// (boundary-normal entries are zero by invariant, so their weight is moot).
pub fn inner_product(a: &VelocityField, b: &VelocityField) -> Result<f64> {
    a.grid().expect_same(&b.grid())?;
    let mut acc = 0.0;
    ndarray::Zip::from(a.ux()).and(b.ux()).for_each(|&x, &y| acc += x * y);
    ndarray::Zip::from(a.uy()).and(b.uy()).for_each(|&x, &y| acc += x * y);
    Ok(acc * a.grid().cell_area())
}

/// `sqrt(<v, v>)`; the `H`-norm of the estimates.
pub fn h_norm(v: &VelocityField) -> f64 {
    inner_product(v, v).expect("same grid").sqrt()
}

/// Transverse 4-point average of `uy` at the interior x-face `(i, j)`.
#[inline]
pub(crate) fn uy_at_xface(v: &VelocityField, i: usize, j: usize) -> f64 {
    0.25 * (v.uy()[[i - 1, j]] + v.uy()[[i, j]] + v.uy()[[i - 1, j + 1]] + v.uy()[[i, j + 1]])
}

/// Transverse 4-point average of `ux` at the interior y-face `(i, j)`.
#[inline]
pub(crate) fn ux_at_yface(v: &VelocityField, i: usize, j: usize) -> f64 {
    0.25 * (v.ux()[[i, j - 1]] + v.ux()[[i, j]] + v.ux()[[i + 1, j - 1]] + v.ux()[[i + 1, j]])
}

/// Visits every interior face with its reconstructed velocity vector
/// `(own component, interpolated transverse)` in `(x, y)` order.
///
/// Used by the norms, the damping term, and the pointwise inequality checks so
/// that all of them see identical samples.
pub(crate) fn for_each_face_vector(v: &VelocityField, mut visit: impl FnMut(FaceRef, f64, f64)) {
    let (nx, ny) = (v.grid().nx(), v.grid().ny());
    for i in 1..nx {
        for j in 0..ny {
            visit(FaceRef::X { i, j }, v.ux()[[i, j]], uy_at_xface(v, i, j));
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            visit(FaceRef::Y { i, j }, ux_at_yface(v, i, j), v.uy()[[i, j]]);
        }
    }
}

/// Identifies one interior face site.
#[derive(Clone, Copy, Debug)]
pub(crate) enum FaceRef {
    X { i: usize, j: usize },
    Y { i: usize, j: usize },
}

/// `(sum_faces M^(p-2) u_own^2 * area)^(1/p)` with `M` the reconstructed
/// vector magnitude at the face; `p = infinity` returns `max M`.
///
/// Requires `p >= 1`.
pub fn lp_norm(v: &VelocityField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid("p", format!("need p >= 1, got {p}")));
    }
    if p.is_infinite() {
        let mut m = 0.0f64;
        for_each_face_vector(v, |_, a, b| m = m.max((a * a + b * b).sqrt()));
        return Ok(m);
    }
    let mut acc = 0.0;
    if p == 2.0 {
        // Exactly the inner product: magnitude weight M^0 = 1 everywhere.
        return Ok(h_norm(v));
    }
    let e = 0.5 * (p - 2.0);
    for_each_face_vector(v, |f, a, b| {
        let m2 = a * a + b * b;
        let own = match f {
            FaceRef::X { .. } => a,
            FaceRef::Y { .. } => b,
        };
        if m2 > 0.0 {
            acc += m2.powf(e) * own * own;
        }
    });
    Ok((acc * v.grid().cell_area()).powf(1.0 / p))
}

/// Largest reconstructed face speed; the advective scale of the CFL guard.
pub fn max_speed(v: &VelocityField) -> f64 {
    let mut m = 0.0f64;
    for_each_face_vector(v, |_, a, b| m = m.max((a * a + b * b).sqrt()));
    m
}

/// Largest sampled entry of the velocity gradient, `max_ij sup |d_i v_j|`,
/// using the same difference stencils and half-cell wall closure as
/// [`h1_seminorm`]: tangential components meet the wall value `0` at
/// distance `h/2`, so the wall sample is `2 |v| / h`.
pub fn grad_sup_norm(v: &VelocityField) -> f64 {
    let grid = v.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ihx, ihy) = (1.0 / grid.hx(), 1.0 / grid.hy());
    let mut m = 0.0f64;
    for j in 0..ny {
        for i in 0..nx {
            m = m.max((v.ux()[[i + 1, j]] - v.ux()[[i, j]]).abs() * ihx);
        }
    }
    for i in 1..nx {
        for j in 0..ny - 1 {
            m = m.max((v.ux()[[i, j + 1]] - v.ux()[[i, j]]).abs() * ihy);
        }
        m = m.max(2.0 * v.ux()[[i, 0]].abs() * ihy);
        m = m.max(2.0 * v.ux()[[i, ny - 1]].abs() * ihy);
    }
    for i in 0..nx {
        for j in 0..ny {
            m = m.max((v.uy()[[i, j + 1]] - v.uy()[[i, j]]).abs() * ihy);
        }
    }
    for j in 1..ny {
        for i in 0..nx - 1 {
            m = m.max((v.uy()[[i + 1, j]] - v.uy()[[i, j]]).abs() * ihx);
        }
        m = m.max(2.0 * v.uy()[[0, j]].abs() * ihx);
        m = m.max(2.0 * v.uy()[[nx - 1, j]].abs() * ihx);
    }
    m
}

/// Face gradient of a cell scalar; boundary-normal entries are zero, the
/// zero-flux closure of the pressure solve.
pub fn gradient(s: &ScalarField) -> VelocityField {
    let grid = s.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut g = VelocityField::zeros(grid);
    for i in 1..nx {
        for j in 0..ny {
            g.ux_mut()[[i, j]] = (s.values()[[i, j]] - s.values()[[i - 1, j]]) / grid.hx();
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            g.uy_mut()[[i, j]] = (s.values()[[i, j]] - s.values()[[i, j - 1]]) / grid.hy();
        }
    }
    g
}

/// Cell divergence of face velocities.
pub fn divergence(v: &VelocityField) -> ScalarField {
    let grid = v.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut d = ScalarField::zeros(grid);
    for i in 0..nx {
        for j in 0..ny {
            d.values_mut()[[i, j]] = (v.ux()[[i + 1, j]] - v.ux()[[i, j]]) / grid.hx()
                + (v.uy()[[i, j + 1]] - v.uy()[[i, j]]) / grid.hy();
        }
    }
    d
}

/// Five-point Laplacian on each velocity component with the no-slip closure:
/// boundary-normal neighbours read the stored zeros, tangential walls use
/// reflected ghosts.  Output is zero on boundary-normal faces (those are
/// constrained, not evolved).
pub fn laplacian_velocity(v: &VelocityField) -> VelocityField {
    let grid = v.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ihx2, ihy2) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let mut out = VelocityField::zeros(grid);
    for i in 1..nx {
        for j in 0..ny {
            let c = v.ux()[[i, j]];
            let xx = (v.ux()[[i + 1, j]] - 2.0 * c + v.ux()[[i - 1, j]]) * ihx2;
            let north = if j + 1 < ny { v.ux()[[i, j + 1]] } else { -c };
            let south = if j > 0 { v.ux()[[i, j - 1]] } else { -c };
            let yy = (north - 2.0 * c + south) * ihy2;
            out.ux_mut()[[i, j]] = xx + yy;
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            let c = v.uy()[[i, j]];
            let east = if i + 1 < nx { v.uy()[[i + 1, j]] } else { -c };
            let west = if i > 0 { v.uy()[[i - 1, j]] } else { -c };
            let xx = (east - 2.0 * c + west) * ihx2;
            let yy = (v.uy()[[i, j + 1]] - 2.0 * c + v.uy()[[i, j - 1]]) * ihy2;
            out.uy_mut()[[i, j]] = xx + yy;
        }
    }
    out
}

/// Discrete `H1`-seminorm built from the same edge differences (and ghost
/// closures) as [`laplacian_velocity`], so that
/// `h1_seminorm(v)^2 == -<v, laplacian_velocity(v)>` exactly.
pub fn h1_seminorm(v: &VelocityField) -> f64 {
    let grid = v.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ihx2, ihy2) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let mut acc = 0.0;
    // ux: pinned-end differences along x, reflected ghosts along y.
    for j in 0..ny {
        for i in 0..nx {
            let d = v.ux()[[i + 1, j]] - v.ux()[[i, j]];
            acc += d * d * ihx2;
        }
    }
    for i in 1..nx {
        for j in 0..ny - 1 {
            let d = v.ux()[[i, j + 1]] - v.ux()[[i, j]];
            acc += d * d * ihy2;
        }
        let first = v.ux()[[i, 0]];
        let last = v.ux()[[i, ny - 1]];
        acc += 2.0 * (first * first + last * last) * ihy2;
    }
    // uy: mirrored.
    for i in 0..nx {
        for j in 0..ny {
            let d = v.uy()[[i, j + 1]] - v.uy()[[i, j]];
            acc += d * d * ihy2;
        }
    }
    for j in 1..ny {
        for i in 0..nx - 1 {
            let d = v.uy()[[i + 1, j]] - v.uy()[[i, j]];
            acc += d * d * ihx2;
        }
        let first = v.uy()[[0, j]];
        let last = v.uy()[[nx - 1, j]];
        acc += 2.0 * (first * first + last * last) * ihx2;
    }
    (acc * grid.cell_area()).sqrt()
}

/// Convection in conservative flux form, `div(v (x) v)`, with linear two-point
/// interpolations to cell centres and corners.
///
/// On discretely divergence-free fields this coincides with the advective form
/// `(v . grad) v` and pairs to zero against `v` itself — the discrete analogue
/// of the skew-symmetry that drops the convective term from energy balances.
/// Wall corner fluxes vanish because the normal velocity on the wall is zero.
pub fn convection(v: &VelocityField) -> VelocityField {
    let grid = v.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ihx, ihy) = (1.0 / grid.hx(), 1.0 / grid.hy());
    let mut out = VelocityField::zeros(grid);
    let (ux, uy) = (v.ux(), v.uy());
    for i in 1..nx {
        for j in 0..ny {
            let ue = 0.5 * (ux[[i, j]] + ux[[i + 1, j]]);
            let uw = 0.5 * (ux[[i - 1, j]] + ux[[i, j]]);
            let south = if j > 0 {
                0.5 * (uy[[i - 1, j]] + uy[[i, j]]) * 0.5 * (ux[[i, j - 1]] + ux[[i, j]])
            } else {
                0.0
            };
            let north = if j + 1 < ny {
                0.5 * (uy[[i - 1, j + 1]] + uy[[i, j + 1]]) * 0.5 * (ux[[i, j]] + ux[[i, j + 1]])
            } else {
                0.0
            };
            out.ux_mut()[[i, j]] = (ue * ue - uw * uw) * ihx + (north - south) * ihy;
        }
    }
    for i in 0..nx {
        for j in 1..ny {
            let vn = 0.5 * (uy[[i, j]] + uy[[i, j + 1]]);
            let vs = 0.5 * (uy[[i, j - 1]] + uy[[i, j]]);
            let west = if i > 0 {
                0.5 * (ux[[i, j - 1]] + ux[[i, j]]) * 0.5 * (uy[[i - 1, j]] + uy[[i, j]])
            } else {
                0.0
            };
            let east = if i + 1 < nx {
                0.5 * (ux[[i + 1, j - 1]] + ux[[i + 1, j]]) * 0.5 * (uy[[i, j]] + uy[[i + 1, j]])
            } else {
                0.0
            };
            out.uy_mut()[[i, j]] = (east - west) * ihx + (vn * vn - vs * vs) * ihy;
        }
    }
    out
}

/// Damping nonlinearity `|v|^(r-1) v` evaluated per face with the
/// reconstructed magnitude.  `r = 1` is exactly the identity.
pub fn forchheimer(v: &VelocityField, r: f64) -> Result<VelocityField> {
    validate_exponent(r)?;
    let mut out = VelocityField::zeros(v.grid());
    if r == 1.0 {
        return Ok(v.clone());
    }
    let e = 0.5 * (r - 1.0);
    for_each_face_vector(v, |f, a, b| {
        let m2 = a * a + b * b;
        let w = if m2 > 0.0 { m2.powf(e) } else { 0.0 };
        match f {
            FaceRef::X { i, j } => out.ux_mut()[[i, j]] = w * a,
            FaceRef::Y { i, j } => out.uy_mut()[[i, j]] = w * b,
        }
    });
    Ok(out)
}

pub(crate) fn validate_exponent(r: f64) -> Result<()> {
    if (1.0..=3.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::invalid(
            "r",
            format!("absorption exponent must lie in [1, 3], got {r}"),
        ))
    }
}

/// Orthogonal projection onto discretely divergence-free fields, returning
/// the projected field and the potential whose gradient was removed.
pub fn project_with_potential(
    solver: &PoissonNeumann,
    v: &VelocityField,
) -> Result<(VelocityField, ScalarField)> {
    solver.grid().expect_same(&v.grid())?;
    let phi = solver.solve(&divergence(v))?;
    let proj = v.clone().axpy(-1.0, &gradient(&phi))?;
    Ok((proj, phi))
}

/// Convenience wrapper building the Poisson solver on the fly.
pub fn leray_project(v: &VelocityField) -> Result<VelocityField> {
    let solver = PoissonNeumann::new(v.grid());
    Ok(project_with_potential(&solver, v)?.0)
}
