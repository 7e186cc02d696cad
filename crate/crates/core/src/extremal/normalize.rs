//! Projection onto the moment constraints `∫ψ = f`, `∫ψ^p = F`.
//!
//! The projection searches the family `ψ = a·φ^θ` (`a, θ > 0`). The ratio
//! `∫ψ^p / (∫ψ)^p` does not depend on `a` and increases with `θ`, so the
//! two-dimensional solve splits into a safeguarded Newton solve for `θ` and a
//! closed-form `a`.

use crate::error::{Error, Result};
use crate::maximal::powp;
use crate::tree::TreeFunction;

const MAX_STEPS: usize = 400;

struct Shape {
    masses: Vec<f64>,
    /// `ln(φ / max φ)` on the support, `None` off it.
    logs: Vec<Option<f64>>,
    p: f64,
}

impl Shape {
    /// `(∫u^θ, ∫u^{pθ})` with `u = φ / max φ`.
    fn moments(&self, theta: f64) -> (f64, f64) {
        let (mut m1, mut mp) = (0.0, 0.0);
        for (m, l) in self.masses.iter().zip(&self.logs) {
            if let Some(l) = l {
                let u = (theta * l).exp();
                m1 += m * u;
                mp += m * powp(u, self.p);
            }
        }
        (m1, mp)
    }

    fn ratio(&self, theta: f64) -> f64 {
        let (m1, mp) = self.moments(theta);
        mp / powp(m1, self.p)
    }

    /// `ln R(θ)` and its derivative `p (E_{pθ}[ln u] − E_θ[ln u])`, where
    /// `E_s` averages against the weights `u^s dμ`.
    fn log_ratio(&self, theta: f64) -> (f64, f64) {
        let (mut m1, mut mp, mut l1, mut lp) = (0.0, 0.0, 0.0, 0.0);
        for (m, l) in self.masses.iter().zip(&self.logs) {
            if let Some(l) = l {
                let u = (theta * l).exp();
                let up = powp(u, self.p);
                m1 += m * u;
                mp += m * up;
                l1 += m * u * l;
                lp += m * up * l;
            }
        }
        (mp.ln() - self.p * m1.ln(), self.p * (lp / mp - l1 / m1))
    }
}

/// Rescales `φ` to `a·φ^θ` so that `∫ψ = f` and `∫ψ^p = F` within `tol`.
///
/// Leaf ordering and the zero set of `φ` are preserved.
pub fn normalize_moments(phi: &TreeFunction, p: f64, f: f64, big_f: f64, tol: f64) -> Result<TreeFunction> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    if !(tol > 0.0) || !(f > 0.0) || !(big_f > 0.0) {
        return Err(Error::Domain(format!(
            "need positive f, F and tol, got f = {f}, F = {big_f}, tol = {tol}"
        )));
    }
    let tree = phi.tree();
    let masses: Vec<f64> = tree.leaves().iter().map(|n| n.mass).collect();
    let values = phi.values();
    let integral = |v: &[f64], q: f64| -> f64 {
        masses.iter().zip(v).map(|(m, x)| m * powp(*x, q)).sum()
    };

    if (integral(values, 1.0) - f).abs() <= tol && (integral(values, p) - big_f).abs() <= tol {
        return Ok(phi.clone());
    }

    let vmax = values.iter().copied().fold(0.0, f64::max);
    if vmax <= 0.0 {
        return Err(Error::CannotNormalize("function vanishes identically".into()));
    }
    let shape = Shape {
        logs: values
            .iter()
            .map(|&v| (v > 0.0).then(|| (v / vmax).ln()))
            .collect(),
        masses: masses.clone(),
        p,
    };
    let target = big_f / powp(f, p);
    let support: f64 = masses.iter().zip(values).filter(|(_, v)| **v > 0.0).map(|(m, _)| m).sum();
    let top: f64 = masses.iter().zip(values).filter(|(_, v)| **v == vmax).map(|(m, _)| m).sum();

    let finish = |theta: f64| -> Result<TreeFunction> {
        let (m1, _) = shape.moments(theta);
        let a = f / m1;
        let out: Vec<f64> = shape
            .logs
            .iter()
            .map(|l| l.map_or(0.0, |l| a * (theta * l).exp()))
            .collect();
        let (got_f, got_big_f) = (integral(&out, 1.0), integral(&out, p));
        if (got_f - f).abs() > tol || (got_big_f - big_f).abs() > tol {
            return Err(Error::NumericFailure(format!(
                "normalized moments ({got_f}, {got_big_f}) miss ({f}, {big_f}) by more than {tol:e}"
            )));
        }
        phi.with_values(out)
    };

    // Constant on its support: the family collapses to one shape.
    if top >= support * (1.0 - 1e-15) {
        let reach = powp(support, 1.0 - p);
        if (reach - target).abs() * powp(f, p) > tol {
            return Err(Error::CannotNormalize(format!(
                "shape is constant on its support and only reaches F/f^p = {reach}, not {target}"
            )));
        }
        return finish(1.0);
    }

    let (lo_limit, hi_limit) = (powp(support, 1.0 - p), powp(top, 1.0 - p));
    if !(target > lo_limit && target < hi_limit) {
        return Err(Error::CannotNormalize(format!(
            "F/f^p = {target} outside the reachable range ({lo_limit}, {hi_limit}) of this shape"
        )));
    }

    // Bracket θ, starting from the identity exponent.
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut guard = 0;
    while shape.ratio(lo) > target {
        lo *= 0.5;
        guard += 1;
        if guard > 200 || lo < 1e-300 {
            return Err(Error::CannotNormalize("target ratio below reach as θ → 0".into()));
        }
    }
    guard = 0;
    while shape.ratio(hi) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 200 || !shape.moments(hi).0.is_normal() {
            return Err(Error::CannotNormalize("target ratio beyond reach as θ → ∞".into()));
        }
    }
    // Newton on ln R(θ) = ln target, falling back to bisection whenever the
    // step leaves the bracket.
    let goal = target.ln();
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..MAX_STEPS {
        let (value, slope) = shape.log_ratio(theta);
        let resid = value - goal;
        if resid == 0.0 {
            break;
        }
        if resid < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let newton = theta - resid / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == theta || hi - lo <= 4.0 * f64::EPSILON * hi || resid.abs() < 1e-15 {
            break;
        }
        theta = next;
    }
    finish(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maximal::integrate_power;
    use crate::tree::MeasureTree;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn func(arity: usize, depth: usize, values: &[f64]) -> TreeFunction {
        let tree = Arc::new(MeasureTree::uniform(arity, depth).unwrap());
        TreeFunction::new(tree, values.to_vec()).unwrap()
    }

    #[test]
    fn identity_when_moments_already_match() {
        let phi = func(2, 1, &[0.5, 1.5]);
        let out = normalize_moments(&phi, 2.0, 1.0, 1.25, 1e-10).unwrap();
        assert_eq!(out, phi);
    }

    #[test]
    fn constants_reach_only_the_boundary() {
        let phi = func(2, 2, &[3.0; 4]);
        let out = normalize_moments(&phi, 2.0, 1.5, 2.25, 1e-10).unwrap();
        for v in out.values() {
            assert_abs_diff_eq!(*v, 1.5, epsilon = 1e-12);
        }
        assert!(matches!(
            normalize_moments(&phi, 2.0, 1.0, 2.0, 1e-10),
            Err(Error::CannotNormalize(_))
        ));
    }

    #[test]
    fn two_leaf_solve_matches_closed_form() {
        // 2(1 + u²) / (1 + u)² = 4/3 with u = 2^θ gives u = 2 + √3.
        let phi = func(2, 1, &[1.0, 2.0]);
        let out = normalize_moments(&phi, 2.0, 1.0, 4.0 / 3.0, 1e-12).unwrap();
        let t = out.tree();
        assert_abs_diff_eq!(integrate_power(t, out.values(), 1.0, t.root()).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate_power(t, out.values(), 2.0, t.root()).unwrap(), 4.0 / 3.0, epsilon = 1e-12);
        let u = 2.0 + 3f64.sqrt();
        let a = 2.0 / (1.0 + u);
        assert_abs_diff_eq!(out.values()[0], a, epsilon = 1e-9);
        assert_abs_diff_eq!(out.values()[1], a * u, epsilon = 1e-9);
    }

    #[test]
    fn zeros_stay_zero_and_order_is_kept() {
        let phi = func(2, 2, &[0.0, 1.0, 3.0, 2.0]);
        let out = normalize_moments(&phi, 3.0, 1.0, 2.0, 1e-10).unwrap();
        let v = out.values();
        assert_eq!(v[0], 0.0);
        assert!(v[1] < v[3] && v[3] < v[2]);
    }

    #[test]
    fn unreachable_targets_are_reported() {
        let phi = func(2, 1, &[1.0, 2.0]);
        // A two-atom shape tops out at F/f^p = 2 for p = 2.
        assert!(matches!(
            normalize_moments(&phi, 2.0, 1.0, 2.5, 1e-10),
            Err(Error::CannotNormalize(_))
        ));
        let zero = func(2, 1, &[0.0, 0.0]);
        assert!(matches!(
            normalize_moments(&zero, 2.0, 1.0, 1.5, 1e-10),
            Err(Error::CannotNormalize(_))
        ));
    }
}
