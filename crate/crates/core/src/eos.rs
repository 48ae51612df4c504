//! Equations of state rho(p, h) with analytic derivatives and the mixture
//! sound speed used by the convective upwinding.
//!
//! Only the perfect gas ships as a built-in, but every solver path that
//! needs thermodynamics goes through the [`EquationOfState`] capability so
//! that a tabulated or functional EOS can be plugged in behind the same
//! interface. The nonlinear pressure-enthalpy coupling is exercised by
//! routing the perfect gas through [`GeneralizedEos`], which hides the
//! closed-form shortcuts.

use crate::error::{Result, SolverError};

/// Capability: density as a function of scaled pressure and enthalpy,
/// with analytic partial derivatives.
///
/// Admissible domain: p > 0, h > 0, with drho/dp > 0 and drho/dh != 0.
pub trait EquationOfState: Sync + Send {
    /// rho(p, h).
    fn density(&self, p: f64, h: f64) -> f64;
    /// d rho / d p at fixed h.
    fn drho_dp(&self, p: f64, h: f64) -> f64;
    /// d rho / d h at fixed p.
    fn drho_dh(&self, p: f64, h: f64) -> f64;

    /// Closed-form primitive recovery, when the EOS admits one.
    ///
    /// Given rho and the internal energy density rho*e, returns (p, h)
    /// solving { rho*h - p = rho*e ; rho(p,h) = rho }. The generic 2x2
    /// root-find is used when this returns `None`.
    fn primitive_closed_form(&self, _rho: f64, _rho_e: f64) -> Option<(f64, f64)> {
        None
    }

    /// Perfect-gas view, when the EOS is one: unlocks the linear
    /// (single-solve) pressure path of the implicit step.
    fn perfect_gas(&self) -> Option<PerfectGas> {
        None
    }

    /// Checked density evaluation with domain validation.
    fn density_checked(&self, p: f64, h: f64) -> Result<f64> {
        if !(p > 0.0 && h > 0.0) {
            return Err(SolverError::EosDomain(format!(
                "density called outside admissible region: p={p}, h={h}"
            )));
        }
        let rho = self.density(p, h);
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(SolverError::EosDomain(format!(
                "non-positive density rho={rho} at p={p}, h={h}"
            )));
        }
        Ok(rho)
    }
}

/// Squared mixture sound speed a_m^2 = 1 / (drho/dp + (1/rho) drho/dh).
///
/// The inverse-of-sum form recovers gamma*p/rho exactly for a perfect gas.
pub fn sound_speed_squared<E: EquationOfState + ?Sized>(
    eos: &E,
    p: f64,
    h: f64,
    rho: f64,
) -> Result<f64> {
    let s = eos.drho_dp(p, h) + eos.drho_dh(p, h) / rho;
    if s <= 0.0 || !s.is_finite() {
        return Err(SolverError::EosDomain(format!(
            "non-positive compressibility {s} at p={p}, h={h}, rho={rho}"
        )));
    }
    Ok(1.0 / s)
}

/// Invert rho(p, h) = rho for h at fixed p (Newton on the scalar residual).
///
/// Needed to initialize cases whose data is given as (rho, p).
pub fn enthalpy_from_density<E: EquationOfState + ?Sized>(
    eos: &E,
    p: f64,
    rho: f64,
) -> Result<f64> {
    // Scalar Newton; start from an O(1) guess.
    let mut h = 1.0;
    // Better initial guess when the EOS looks perfect-gas-like.
    let r1 = eos.density(p, 1.0);
    if r1.is_finite() && r1 > 0.0 {
        // rho ~ C p / h  =>  h ~ r1 / rho (with p fixed, C p = r1 * 1.0)
        let guess = r1 / rho;
        if guess.is_finite() && guess > 0.0 {
            h = guess;
        }
    }
    for _ in 0..100 {
        let f = eos.density(p, h) - rho;
        if f.abs() <= 1e-14 * rho.abs().max(1.0) {
            return Ok(h);
        }
        let df = eos.drho_dh(p, h);
        if df == 0.0 || !df.is_finite() {
            return Err(SolverError::RootFind(format!(
                "drho/dh vanished inverting EOS at p={p}, h={h}"
            )));
        }
        let mut step = f / df;
        // Keep the iterate in the admissible half-line.
        while h - step <= 0.0 {
            step *= 0.5;
        }
        h -= step;
    }
    Err(SolverError::RootFind(format!(
        "enthalpy_from_density did not converge for p={p}, rho={rho}"
    )))
}

/// Perfect gas: rho(p, h) = (gamma/(gamma-1)) * p / h, rho*e = p/(gamma-1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfectGas {
    pub gamma: f64,
}

impl PerfectGas {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(SolverError::Config(format!(
                "perfect gas requires gamma > 1, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    #[inline]
    pub fn gm1(&self) -> f64 {
        self.gamma - 1.0
    }

    /// Exact inverse h = (gamma/(gamma-1)) p / rho.
    pub fn enthalpy(&self, p: f64, rho: f64) -> f64 {
        self.gamma / self.gm1() * p / rho
    }
}

impl EquationOfState for PerfectGas {
    #[inline]
    fn density(&self, p: f64, h: f64) -> f64 {
        self.gamma / (self.gamma - 1.0) * p / h
    }

    #[inline]
    fn drho_dp(&self, _p: f64, h: f64) -> f64 {
        self.gamma / (self.gamma - 1.0) / h
    }

    #[inline]
    fn drho_dh(&self, p: f64, h: f64) -> f64 {
        -self.gamma / (self.gamma - 1.0) * p / (h * h)
    }

    #[inline]
    fn primitive_closed_form(&self, rho: f64, rho_e: f64) -> Option<(f64, f64)> {
        let p = (self.gamma - 1.0) * rho_e;
        let h = self.gamma / (self.gamma - 1.0) * p / rho;
        Some((p, h))
    }

    #[inline]
    fn perfect_gas(&self) -> Option<PerfectGas> {
        Some(*self)
    }
}

/// Wrapper that routes any EOS through the generic (non-closed-form) paths.
///
/// Used to exercise the Newton pressure-enthalpy coupling with the perfect
/// gas as reference thermodynamics.
pub struct GeneralizedEos<E: EquationOfState>(pub E);

impl<E: EquationOfState> EquationOfState for GeneralizedEos<E> {
    fn density(&self, p: f64, h: f64) -> f64 {
        self.0.density(p, h)
    }
    fn drho_dp(&self, p: f64, h: f64) -> f64 {
        self.0.drho_dp(p, h)
    }
    fn drho_dh(&self, p: f64, h: f64) -> f64 {
        self.0.drho_dh(p, h)
    }
    // primitive_closed_form deliberately not forwarded.
}
