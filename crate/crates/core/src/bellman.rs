//! Closed-form Bellman machinery for the tree maximal operator.
//!
//! `H_p(z) = −(p−1) z^p + p z^{p−1}` decreases strictly from 1 to 0 on
//! `[1, p/(p−1)]`; its inverse `ω_p` maps `[0, 1]` back onto that interval.
//! The Bellman function is `S_p(f, F) = F ω_p(f^p / F)^p`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default residual tolerance for [`omega_p`].
pub const OMEGA_TOL: f64 = 1e-12;
/// Hard cap on bisection steps. Float exhaustion of the bracket takes ~60.
pub const MAX_BISECTIONS: usize = 200;
/// `omega_derivative` refuses arguments this close to 1.
pub const SINGULARITY_GUARD: f64 = 1e-9;

/// Exponent and the two prescribed moments `f = ∫φ`, `F = ∫φ^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellmanParams {
    pub p: f64,
    pub f: f64,
    #[serde(rename = "F")]
    pub big_f: f64,
}

impl BellmanParams {
    pub fn new(p: f64, f: f64, big_f: f64) -> Result<Self> {
        let params = BellmanParams { p, f, big_f };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if !(self.f > 0.0 && self.f.is_finite()) {
            return Err(Error::Domain(format!("f = {} must be positive", self.f)));
        }
        if !(self.big_f > 0.0 && self.big_f.is_finite()) {
            return Err(Error::Domain(format!("F = {} must be positive", self.big_f)));
        }
        let f_pow = self.f.powf(self.p);
        if f_pow > self.big_f {
            return Err(Error::InfeasibleMoments {
                f_pow,
                big_f: self.big_f,
            });
        }
        Ok(())
    }

    /// `f^p / F`, in `(0, 1]`.
    pub fn ratio(&self) -> f64 {
        (self.f.powf(self.p) / self.big_f).min(1.0)
    }
}

/// Result of inverting `H_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaSolve {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// `p / (p − 1)`, the right end of the domain of `H_p`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

fn h_unchecked(p: f64, z: f64) -> f64 {
    z.powf(p - 1.0) * (p - (p - 1.0) * z)
}

pub fn h_p(p: f64, z: f64) -> Result<f64> {
    check_p(p)?;
    if !(1.0..=conjugate(p)).contains(&z) {
        return Err(Error::Domain(format!(
            "z = {z} outside [1, {}]",
            conjugate(p)
        )));
    }
    Ok(h_unchecked(p, z))
}

/// Inverts `H_p` by bisection on `[1, p/(p−1)]`.
///
/// The bracket is halved until it cannot shrink further in floating point;
/// `tol` bounds the accepted residual `|H_p(z) − x|`.
pub fn omega_p(p: f64, x: f64, tol: f64) -> Result<OmegaSolve> {
    check_p(p)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
    }
    let (mut lo, mut hi) = (1.0, conjugate(p));
    if x == 1.0 {
        return Ok(OmegaSolve { value: lo, residual: 0.0, iterations: 0 });
    }
    if x == 0.0 {
        return Ok(OmegaSolve {
            value: hi,
            residual: h_unchecked(p, hi).abs(),
            iterations: 0,
        });
    }

    let mut iterations = 0;
    while iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        // H_p decreasing: a value above x means the root lies to the right.
        if h_unchecked(p, mid) > x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (r_lo, r_hi) = ((h_unchecked(p, lo) - x).abs(), (h_unchecked(p, hi) - x).abs());
    let (value, residual) = if r_lo <= r_hi { (lo, r_lo) } else { (hi, r_hi) };
    if residual > tol {
        return Err(Error::NumericFailure(format!(
            "omega_p({p}, {x}): residual {residual:e} exceeds {tol:e} after {iterations} bisections"
        )));
    }
    Ok(OmegaSolve { value, residual, iterations })
}

fn omega(p: f64, x: f64) -> Result<f64> {
    omega_p(p, x, OMEGA_TOL).map(|s| s.value)
}

/// `S_p(f, F) = F ω_p(f^p / F)^p`.
pub fn bellman_value(params: &BellmanParams) -> Result<f64> {
    params.validate()?;
    let w = omega(params.p, params.ratio())?;
    Ok(params.big_f * w.powf(params.p))
}

/// `d/dx ω_p(x)^p = −(1/(p−1)) ω_p(x) / (ω_p(x) − 1)`.
pub fn omega_derivative(p: f64, x: f64) -> Result<f64> {
    check_p(p)?;
    if x >= 1.0 - SINGULARITY_GUARD {
        return Err(Error::SingularityGuard(x));
    }
    let w = omega(p, x)?;
    Ok(-w / ((p - 1.0) * (w - 1.0)))
}

/// `G(t) = t ω_p(1/t)^p` for `t > 1`.
pub fn g_curve(p: f64, t: f64) -> Result<f64> {
    check_p(p)?;
    if !(t > 1.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must exceed 1")));
    }
    Ok(t * omega(p, 1.0 / t)?.powf(p))
}

/// `G′(t) = ω^p + (1/(p−1)) (1/t) ω/(ω−1)` with `ω = ω_p(1/t)`.
pub fn g_slope(p: f64, t: f64) -> Result<f64> {
    check_p(p)?;
    if !(t > 1.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t = {t} must exceed 1")));
    }
    let w = omega(p, 1.0 / t)?;
    Ok(w.powf(p) + w / ((p - 1.0) * t * (w - 1.0)))
}

/// One row of a concavity scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcavityPoint {
    pub t: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub second_diff: f64,
}

/// Second differences `G(t−h) − 2G(t) + G(t+h)` at the interior points of
/// an `n`-point uniform grid on `[t_min, t_max]`, with `h` the grid step.
pub fn concavity_scan(p: f64, t_min: f64, t_max: f64, n: usize) -> Result<Vec<ConcavityPoint>> {
    check_p(p)?;
    if !(t_min > 1.0 && t_max > t_min && t_max.is_finite()) || n < 3 {
        return Err(Error::Domain(format!(
            "need 1 < t_min < t_max and n >= 3, got [{t_min}, {t_max}], n = {n}"
        )));
    }
    let h = (t_max - t_min) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { t_max } else { t_min + h * i as f64 })
        .collect();
    let g: Vec<f64> = grid.iter().map(|&t| g_curve(p, t)).collect::<Result<_>>()?;
    Ok((1..n - 1)
        .map(|i| ConcavityPoint {
            t: grid[i],
            g: g[i],
            second_diff: g[i - 1] - 2.0 * g[i] + g[i + 1],
        })
        .collect())
}
