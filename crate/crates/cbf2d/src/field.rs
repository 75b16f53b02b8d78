//! Discrete fields: staggered velocities, cell-centred scalars, and uniform
//! time series.

use crate::error::{Error, Result};
use crate::grid::Grid;
use ndarray::Array2;

/// Velocity sampled on the staggered faces of a [`Grid`].
///
/// Invariants maintained by every constructor and operation:
/// * `ux` has shape `(nx+1, ny)`, `uy` has shape `(nx, ny+1)`;
/// * boundary-normal entries (`ux` at `i = 0, nx`; `uy` at `j = 0, ny`) are
///   exactly `0.0` (no-slip walls carry no normal flux);
/// * all samples are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    grid: Grid,
    ux: Array2<f64>,
    uy: Array2<f64>,
}

impl VelocityField {
    pub fn zeros(grid: Grid) -> Self {
        VelocityField {
            grid,
            ux: Array2::zeros((grid.nx() + 1, grid.ny())),
            uy: Array2::zeros((grid.nx(), grid.ny() + 1)),
        }
    }

    /// Samples closures `(x, y) -> value` at the face sites.  Values returned
    /// for boundary-normal faces are discarded and replaced by exact zeros.
    pub fn from_fn(
        grid: Grid,
        fx: impl Fn(f64, f64) -> f64,
        fy: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut v = VelocityField::zeros(grid);
        for i in 1..grid.nx() {
            for j in 0..grid.ny() {
                let (x, y) = grid.xface(i, j);
                v.ux[[i, j]] = fx(x, y);
            }
        }
        for i in 0..grid.nx() {
            for j in 1..grid.ny() {
                let (x, y) = grid.yface(i, j);
                v.uy[[i, j]] = fy(x, y);
            }
        }
        v.ensure_finite()?;
        Ok(v)
    }

    /// Builds the discrete curl of a stream function sampled at cell corners:
    /// `ux = d(psi)/dy`, `uy = -d(psi)/dx` via exact face differences.  The
    /// result is divergence-free to rounding by construction, and has zero
    /// boundary-normal components whenever `psi` is constant along the walls.
    pub fn from_stream(grid: Grid, psi: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut nodes = Array2::zeros((nx + 1, ny + 1));
        for i in 0..=nx {
            for j in 0..=ny {
                let (x, y) = grid.node(i, j);
                nodes[[i, j]] = psi(x, y);
            }
        }
        let mut v = VelocityField::zeros(grid);
        for i in 1..nx {
            for j in 0..ny {
                v.ux[[i, j]] = (nodes[[i, j + 1]] - nodes[[i, j]]) / grid.hy();
            }
        }
        for i in 0..nx {
            for j in 1..ny {
                v.uy[[i, j]] = -(nodes[[i + 1, j]] - nodes[[i, j]]) / grid.hx();
            }
        }
        v.ensure_finite()?;
        Ok(v)
    }

    /// Wraps raw component arrays, validating shapes, boundary zeros and
    /// finiteness.
    pub fn from_components(grid: Grid, ux: Array2<f64>, uy: Array2<f64>) -> Result<Self> {
        if ux.dim() != (grid.nx() + 1, grid.ny()) || uy.dim() != (grid.nx(), grid.ny() + 1) {
            return Err(Error::invalid(
                "velocity components",
                format!(
                    "expected shapes ({},{}) and ({},{}), got ({},{}) and ({},{})",
                    grid.nx() + 1,
                    grid.ny(),
                    grid.nx(),
                    grid.ny() + 1,
                    ux.dim().0,
                    ux.dim().1,
                    uy.dim().0,
                    uy.dim().1
                ),
            ));
        }
        let v = VelocityField { grid, ux, uy };
        for j in 0..grid.ny() {
            if v.ux[[0, j]] != 0.0 || v.ux[[grid.nx(), j]] != 0.0 {
                return Err(Error::invalid(
                    "velocity components",
                    "boundary-normal ux entries must be exactly zero",
                ));
            }
        }
        for i in 0..grid.nx() {
            if v.uy[[i, 0]] != 0.0 || v.uy[[i, grid.ny()]] != 0.0 {
                return Err(Error::invalid(
                    "velocity components",
                    "boundary-normal uy entries must be exactly zero",
                ));
            }
        }
        v.ensure_finite()?;
        Ok(v)
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn ux(&self) -> &Array2<f64> {
        &self.ux
    }

    #[inline]
    pub fn uy(&self) -> &Array2<f64> {
        &self.uy
    }

    pub(crate) fn ux_mut(&mut self) -> &mut Array2<f64> {
        &mut self.ux
    }

    pub(crate) fn uy_mut(&mut self) -> &mut Array2<f64> {
        &mut self.uy
    }

    /// `self + c * other`, consumed and returned to encourage reuse.
    pub fn axpy(mut self, c: f64, other: &VelocityField) -> Result<VelocityField> {
        self.grid.expect_same(&other.grid)?;
        self.ux.scaled_add(c, &other.ux);
        self.uy.scaled_add(c, &other.uy);
        Ok(self)
    }

    pub fn scaled(mut self, c: f64) -> VelocityField {
        self.ux.mapv_inplace(|v| c * v);
        self.uy.mapv_inplace(|v| c * v);
        self
    }

    pub fn sub(&self, other: &VelocityField) -> Result<VelocityField> {
        self.clone().axpy(-1.0, other)
    }

    /// Largest absolute component sample.
    pub fn max_abs(&self) -> f64 {
        let mx = self.ux.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.uy.iter().fold(mx, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().all(|v| v.is_finite()) && self.uy.iter().all(|v| v.is_finite())
    }

    fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("velocity samples", "non-finite sample"))
        }
    }
}

/// Scalar samples at cell centres (pressure, divergence, potentials).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Array2<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            values: Array2::zeros((grid.nx(), grid.ny())),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut s = ScalarField::zeros(grid);
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let (x, y) = grid.centre(i, j);
                s.values[[i, j]] = f(x, y);
            }
        }
        if s.values.iter().all(|v| v.is_finite()) {
            Ok(s)
        } else {
            Err(Error::invalid("scalar samples", "non-finite sample"))
        }
    }

    pub(crate) fn from_values(grid: Grid, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), (grid.nx(), grid.ny()));
        ScalarField { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.sum() / (self.grid.nx() * self.grid.ny()) as f64
    }

    /// Removes the mean; used to fix the additive pressure gauge.
    pub fn subtract_mean(mut self) -> ScalarField {
        let m = self.mean();
        self.values.mapv_inplace(|v| v - m);
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(mut self, c: f64) -> ScalarField {
        self.values.mapv_inplace(|v| c * v);
        self
    }

    /// Discrete L2 norm with full cell weights.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.grid.expect_same(&other.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: &self.values - &other.values,
        })
    }
}

/// Uniformly sampled scalar time series on `[t0, t0 + n*dt]`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("time series", "needs at least one sample"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("time series", "non-finite sample"));
        }
        Ok(TimeSeries { t0, dt, values })
    }

    pub fn from_fn(t0: f64, dt: f64, len: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..len).map(|n| f(t0 + n as f64 * dt)).collect();
        TimeSeries::new(t0, dt, values)
    }

    #[inline]
    pub fn t0(&self) -> f64 {
        self.t0
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }

    /// Right-endpoint rectangle rule for `||.||_{L2(t0, t_end)}`, matching the
    /// quadrature implied by the implicit Euler stepper (the sample at `t0`
    /// carries no weight).
    pub fn l2_norm(&self) -> f64 {
        (self.values[1..].iter().map(|v| v * v).sum::<f64>() * self.dt).sqrt()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &TimeSeries) -> Result<TimeSeries> {
        self.check_aligned(other)?;
        TimeSeries::new(
            self.t0,
            self.dt,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn add_scaled(&self, c: f64, other: &TimeSeries) -> Result<TimeSeries> {
        self.check_aligned(other)?;
        TimeSeries::new(
            self.t0,
            self.dt,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }

    /// Pointwise map, preserving the time axis.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<TimeSeries> {
        TimeSeries::new(self.t0, self.dt, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn check_aligned(&self, other: &TimeSeries) -> Result<()> {
        let same_axis = self.len() == other.len()
            && (self.t0 - other.t0).abs() <= 1e-12 * (1.0 + self.t0.abs())
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt;
        if same_axis {
            Ok(())
        } else {
            Err(Error::invalid(
                "time series",
                format!(
                    "axes differ: ({}, dt={}, n={}) vs ({}, dt={}, n={})",
                    self.t0,
                    self.dt,
                    self.len(),
                    other.t0,
                    other.dt,
                    other.len()
                ),
            ))
        }
    }
}
