//! Exact Riemann solver for the perfect-gas Euler equations, used as the
//! reference solution in the shock-tube comparisons.
//!
//! The star pressure solves f_L(p) + f_R(p) + (u_R - u_L) = 0 with the
//! usual shock (Rankine-Hugoniot) and rarefaction (isentropic) branches;
//! the root is found by a bracket-guarded Newton iteration. Sampling
//! follows the self-similar structure in xi = x / t.

use crate::error::{Result, SolverError};

/// One side of the Riemann problem in (rho, u, p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

/// Solved wave structure.
#[derive(Debug, Clone, Copy)]
pub struct RiemannSolution {
    pub gamma: f64,
    pub left: RiemannState,
    pub right: RiemannState,
    /// Star-region pressure and velocity.
    pub p_star: f64,
    pub u_star: f64,
    /// Star densities on either side of the contact.
    pub rho_star_l: f64,
    pub rho_star_r: f64,
}

fn sound_speed(gamma: f64, s: &RiemannState) -> f64 {
    (gamma * s.p / s.rho).sqrt()
}

/// f_k(p) and its derivative for one side.
fn side_function(gamma: f64, s: &RiemannState, p: f64) -> (f64, f64) {
    let a = sound_speed(gamma, s);
    if p > s.p {
        // shock branch
        let ak = 2.0 / ((gamma + 1.0) * s.rho);
        let bk = (gamma - 1.0) / (gamma + 1.0) * s.p;
        let sq = (ak / (p + bk)).sqrt();
        let f = (p - s.p) * sq;
        let df = sq * (1.0 - 0.5 * (p - s.p) / (p + bk));
        (f, df)
    } else {
        // rarefaction branch
        let ex = (gamma - 1.0) / (2.0 * gamma);
        let f = 2.0 * a / (gamma - 1.0) * ((p / s.p).powf(ex) - 1.0);
        let df = (p / s.p).powf(-(gamma + 1.0) / (2.0 * gamma)) / (s.rho * a);
        (f, df)
    }
}

/// Solve the star-region state. Fails on vacuum-generating data.
pub fn solve(gamma: f64, left: RiemannState, right: RiemannState) -> Result<RiemannSolution> {
    if !(left.rho > 0.0 && right.rho > 0.0 && left.p > 0.0 && right.p > 0.0) {
        return Err(SolverError::Config("Riemann states must have positive rho, p".into()));
    }
    let al = sound_speed(gamma, &left);
    let ar = sound_speed(gamma, &right);
    let du = right.u - left.u;
    if 2.0 * (al + ar) / (gamma - 1.0) <= du {
        return Err(SolverError::RootFind("vacuum-generating Riemann data".into()));
    }

    let total = |p: f64| -> (f64, f64) {
        let (fl, dl) = side_function(gamma, &left, p);
        let (fr, dr) = side_function(gamma, &right, p);
        (fl + fr + du, dl + dr)
    };

    // Bracket the root: F is monotone increasing in p.
    let mut lo = 1e-14 * left.p.min(right.p);
    let mut hi = left.p.max(right.p);
    while total(hi).0 < 0.0 {
        hi *= 4.0;
        if hi > 1e300 {
            return Err(SolverError::RootFind("star pressure bracket blew up".into()));
        }
    }

    // Two-rarefaction initial guess, clamped into the bracket.
    let z = (gamma - 1.0) / (2.0 * gamma);
    let guess = ((al + ar - 0.5 * (gamma - 1.0) * du)
        / (al / left.p.powf(z) + ar / right.p.powf(z)))
    .powf(1.0 / z);
    let mut p = guess.clamp(lo * 1.0001, hi);

    let mut converged = false;
    for _ in 0..200 {
        let (f, df) = total(p);
        if f > 0.0 {
            hi = hi.min(p);
        } else {
            lo = lo.max(p);
        }
        let step = f / df;
        let mut pn = p - step;
        if !(pn > lo && pn < hi) || !pn.is_finite() {
            pn = 0.5 * (lo + hi); // bisection fallback
        }
        let change = (pn - p).abs();
        p = pn;
        if change <= 1e-12 * p {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SolverError::RootFind("star pressure iteration stalled".into()));
    }

    let (fl, _) = side_function(gamma, &left, p);
    let (fr, _) = side_function(gamma, &right, p);
    let u_star = 0.5 * (left.u + right.u) + 0.5 * (fr - fl);

    let star_rho = |s: &RiemannState| -> f64 {
        if p > s.p {
            // shock density from Rankine-Hugoniot
            let r = p / s.p;
            let g = (gamma - 1.0) / (gamma + 1.0);
            s.rho * (r + g) / (g * r + 1.0)
        } else {
            // isentropic compression/expansion
            s.rho * (p / s.p).powf(1.0 / gamma)
        }
    };

    Ok(RiemannSolution {
        gamma,
        left,
        right,
        p_star: p,
        u_star,
        rho_star_l: star_rho(&left),
        rho_star_r: star_rho(&right),
    })
}

impl RiemannSolution {
    /// Sample the self-similar solution at xi = x / t.
    pub fn sample(&self, xi: f64) -> RiemannState {
        let g = self.gamma;
        if xi <= self.u_star {
            // left of the contact
            let s = &self.left;
            let a = sound_speed(g, s);
            if self.p_star > s.p {
                // left shock
                let shock_speed =
                    s.u - a * ((g + 1.0) / (2.0 * g) * self.p_star / s.p + (g - 1.0) / (2.0 * g))
                        .sqrt();
                if xi <= shock_speed {
                    *s
                } else {
                    RiemannState { rho: self.rho_star_l, u: self.u_star, p: self.p_star }
                }
            } else {
                // left rarefaction
                let a_star = a * (self.p_star / s.p).powf((g - 1.0) / (2.0 * g));
                let head = s.u - a;
                let tail = self.u_star - a_star;
                if xi <= head {
                    *s
                } else if xi >= tail {
                    RiemannState { rho: self.rho_star_l, u: self.u_star, p: self.p_star }
                } else {
                    let u = 2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * s.u + xi);
                    let c = 2.0 / (g + 1.0) * (a + 0.5 * (g - 1.0) * (s.u - xi));
                    RiemannState {
                        rho: s.rho * (c / a).powf(2.0 / (g - 1.0)),
                        u,
                        p: s.p * (c / a).powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        } else {
            // right of the contact
            let s = &self.right;
            let a = sound_speed(g, s);
            if self.p_star > s.p {
                // right shock
                let shock_speed =
                    s.u + a * ((g + 1.0) / (2.0 * g) * self.p_star / s.p + (g - 1.0) / (2.0 * g))
                        .sqrt();
                if xi >= shock_speed {
                    *s
                } else {
                    RiemannState { rho: self.rho_star_r, u: self.u_star, p: self.p_star }
                }
            } else {
                // right rarefaction
                let a_star = a * (self.p_star / s.p).powf((g - 1.0) / (2.0 * g));
                let head = s.u + a;
                let tail = self.u_star + a_star;
                if xi >= head {
                    *s
                } else if xi <= tail {
                    RiemannState { rho: self.rho_star_r, u: self.u_star, p: self.p_star }
                } else {
                    let u = 2.0 / (g + 1.0) * (-a + 0.5 * (g - 1.0) * s.u + xi);
                    let c = 2.0 / (g + 1.0) * (a - 0.5 * (g - 1.0) * (s.u - xi));
                    RiemannState {
                        rho: s.rho * (c / a).powf(2.0 / (g - 1.0)),
                        u,
                        p: s.p * (c / a).powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        }
    }

    /// Speed of the right-moving shock, when the right wave is a shock.
    pub fn right_shock_speed(&self) -> Option<f64> {
        let g = self.gamma;
        let s = &self.right;
        if self.p_star > s.p {
            let a = sound_speed(g, s);
            Some(
                s.u + a
                    * ((g + 1.0) / (2.0 * g) * self.p_star / s.p + (g - 1.0) / (2.0 * g)).sqrt(),
            )
        } else {
            None
        }
    }
}
