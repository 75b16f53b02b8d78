//! Closed-form sufficient conditions for the recovery iteration: does the
//! fixed-point map send its ball into itself, and after how many
//! applications is the composite map a contraction?
//!
//! Both diagnostics are *sufficient-condition surrogates*: the theory's
//! generic constant is set to `1`, so the reported numbers are trend and
//! monotonicity tools, not certified bounds.  They depend on the problem
//! only through a handful of data norms collected in [`DataNorms`].

use serde::Serialize;

use crate::direct::SourceField;
use crate::error::{Error, Result};
use crate::inverse::InverseProblem;
use crate::ops;

/// Upper bound on the search for a contractive iterate count.
pub const K0_SEARCH_CAP: usize = 2_000_000;

/// The input-data norms the admissibility formulas consume.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DataNorms {
    /// `|u0|_H`.
    pub u0_h: f64,
    /// `sup_t |g(t)|_L2`.
    pub sup_g: f64,
    /// `|omega|_H`.
    pub omega_h: f64,
    /// `|lap omega|_H`.
    pub omega_lap_h: f64,
    /// `sup |grad omega|` (largest sampled gradient entry).
    pub omega_grad_sup: f64,
    /// `|omega|_H2 = (|omega|_H^2 + |grad omega|_H^2 + |lap omega|_H^2)^(1/2)`.
    pub omega_h2: f64,
    /// Measured lower bound of `|<g(t), omega>|` over the horizon.
    pub g0: f64,
    /// `|phi'/g1|_L2(0,T)` — the norm of the iteration's ball centre.
    pub phi_rate_l2: f64,
    /// Horizon `T`.
    pub horizon: f64,
}

impl DataNorms {
    /// Measures every norm from a validated problem with the module's own
    /// stencils and the right-rectangle rule in time.
    pub fn measure(problem: &InverseProblem) -> Result<DataNorms> {
        let omega = problem.weight();
        let lap = ops::laplacian_velocity(omega);
        let omega_h = ops::h_norm(omega);
        let omega_lap_h = ops::h_norm(&lap);
        let omega_grad_h = ops::h1_seminorm(omega);
        let cfg = problem.config();
        let sup_g = match problem.source() {
            g @ SourceField::Static(_) => ops::h_norm(g.at(0)),
            g @ SourceField::PerStep(_) => {
                (0..cfg.n_times()).map(|n| ops::h_norm(g.at(n))).fold(0.0, f64::max)
            }
        };
        Ok(DataNorms {
            u0_h: ops::h_norm(problem.initial_state()),
            sup_g,
            omega_h,
            omega_lap_h,
            omega_grad_sup: ops::grad_sup_norm(omega),
            omega_h2: (omega_h * omega_h
                + omega_grad_h * omega_grad_h
                + omega_lap_h * omega_lap_h)
                .sqrt(),
            g0: problem.min_source_pairing(),
            phi_rate_l2: problem.ball_center()?.l2_norm(),
            horizon: cfg.t_final() - cfg.t0(),
        })
    }

    /// Same norms with a different horizon — the `T`-sweep diagnostic.
    pub fn with_horizon(mut self, horizon: f64) -> DataNorms {
        self.horizon = horizon;
        self
    }

    /// `B = |u0| + sqrt(T) a~ sup|g|`: the energy bound on `sup_t |u|_H`
    /// over the ball.
    fn velocity_sup_bound(&self, a_tilde: f64) -> f64 {
        self.u0_h + self.horizon.sqrt() * a_tilde * self.sup_g
    }

    /// `D = |u0|^2 + a~^2 sup|g|^2`: the bound on `sup_t |u|_H^2` (and on
    /// the dissipation integrals).
    fn energy_bound(&self, a_tilde: f64) -> f64 {
        self.u0_h * self.u0_h + a_tilde * a_tilde * self.sup_g * self.sup_g
    }
}

/// Everything the self-map/contraction analysis produces.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub r: f64,
    /// Ball radius `a` around the centre `phi'/g1`.
    pub ball_radius: f64,
    /// `a~ = a + |phi'/g1|_L2` — the amplitude bound inside the ball.
    pub a_tilde: f64,
    /// The self-map constant (`m1` for `r` in (2,3], `m2` for `r` in [1,2]).
    pub self_map_constant: f64,
    pub self_map_label: &'static str,
    /// `self_map_constant < ball_radius`: the map sends the ball into itself.
    pub self_map_ok: bool,
    /// The contraction base (`m4` for `r` in (2,3], `m6` for `r` in [1,2]).
    pub contraction_base: f64,
    pub contraction_label: &'static str,
    /// One-application Lipschitz factor: `(m4 T^(3-r))^(1/2)` or `(m6 T)^(1/2)`.
    pub kappa: f64,
    pub contracts_in_one_step: bool,
    /// Smallest `k` whose `k`-fold composition is a contraction,
    /// `(m^k T^(ek) / k!)^(1/2) < 1`; `None` if not found below the cap.
    pub k0: Option<usize>,
    pub norms: DataNorms,
    /// Honest labelling of what these numbers are.
    pub note: &'static str,
}

/// Smallest `k >= 1` with `(m^k t^(e k) / k!)^(1/2) < 1`, searched in log
/// space; `None` beyond [`K0_SEARCH_CAP`].
fn smallest_contractive_power(m: f64, t: f64, t_exp: f64) -> Option<usize> {
    if m == 0.0 {
        return Some(1);
    }
    let base = m.ln() + t_exp * t.ln();
    let mut log_factorial = 0.0;
    for k in 1..=K0_SEARCH_CAP {
        log_factorial += (k as f64).ln();
        if 0.5 * (k as f64 * base - log_factorial) < 0.0 {
            return Some(k);
        }
    }
    None
}

/// Evaluates the closed-form self-map and contraction constants from data
/// norms alone (generic constant taken as `1`).
pub fn admissibility_from_norms(norms: &DataNorms, r: f64, a: f64) -> Result<AdmissibilityReport> {
    ops::validate_exponent(r)?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid("ball radius", format!("need a finite a > 0, got {a}")));
    }
    if !(norms.g0 > 0.0) {
        return Err(Error::invalid(
            "g0",
            format!("need a positive measurement pairing floor, got {}", norms.g0),
        ));
    }
    if !(norms.horizon > 0.0) {
        return Err(Error::invalid("horizon", "need a positive horizon"));
    }
    let a_tilde = a + norms.phi_rate_l2;
    let b = norms.velocity_sup_bound(a_tilde);
    let d = norms.energy_bound(a_tilde);
    let t = norms.horizon;
    let sturm = norms.omega_lap_h + norms.omega_h;
    let grad = norms.omega_grad_sup;
    let h2 = norms.omega_h2;
    let sharp = r > 2.0;

    let (label, m_self) = if sharp {
        let quadratic = sturm * b + grad * d;
        let m1 = (t * quadratic * quadratic
            + t.powf((3.0 - r) / (r - 1.0))
                * h2
                * h2
                * b.powf(4.0 / (r - 1.0))
                * d.powf(2.0 * (r - 2.0) / (r - 1.0)))
        .sqrt()
            / norms.g0;
        ("m1", m1)
    } else {
        let m2 = t.sqrt() / norms.g0 * (sturm * b + grad * d + h2 * b.powf(r));
        ("m2", m2)
    };

    let amplification = norms.sup_g * norms.sup_g / (norms.g0 * norms.g0)
        * (norms.u0_h * norms.u0_h + a_tilde * a_tilde * norms.sup_g * norms.sup_g).exp();
    let (c_label, m_contract, t_exp) = if sharp {
        let inner = sturm + grad * b;
        let m4 = amplification * (t.powf(r - 2.0) * inner * inner + h2 * h2 * d.powf(r - 1.0));
        ("m4", m4, 3.0 - r)
    } else {
        let inner = sturm + grad * b + h2 * b.powf(r - 1.0);
        ("m6", amplification * inner * inner, 1.0)
    };
    let kappa = (m_contract * t.powf(t_exp)).sqrt();

    Ok(AdmissibilityReport {
        r,
        ball_radius: a,
        a_tilde,
        self_map_constant: m_self,
        self_map_label: label,
        self_map_ok: m_self < a,
        contraction_base: m_contract,
        contraction_label: c_label,
        kappa,
        contracts_in_one_step: kappa < 1.0,
        k0: smallest_contractive_power(m_contract, t, t_exp),
        norms: *norms,
        note: "sufficient-condition surrogate (generic constant set to 1)",
    })
}

/// Measures the norms of a validated problem and evaluates the report.
pub fn admissibility(problem: &InverseProblem, a: f64) -> Result<AdmissibilityReport> {
    admissibility_from_norms(&DataNorms::measure(problem)?, problem.params().r, a)
}
