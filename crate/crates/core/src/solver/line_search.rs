//! Weak-Wolfe bracketing line search with a hard upper bound on the step.

use crate::error::Result;

/// One trial along the ray: value, directional derivative and whatever the
/// caller wants to keep for the accepted point. `None` means the trial left
/// the domain and is treated as an Armijo failure.
pub type Trial<T> = Option<(f64, f64, T)>;

#[derive(Debug)]
pub struct Accepted<T> {
    pub step: f64,
    pub value: f64,
    pub payload: T,
}

pub const MAX_BRACKETING_STEPS: usize = 60;

/// Once decreases fall below rounding in `phi`, sufficient decrease is judged
/// from the slopes instead: a quadratic through `phi'(0)` and `phi'(t)` decreases
/// by at least `c1 t |phi'(0)|` iff `phi'(t) <= (2 c1 - 1) phi'(0)`.
const APPROX_ARMIJO_RTOL: f64 = 1e-12;

/// Returns a step in `(0, t_max]` with
/// `phi(t) <= phi0 + c1 t slope0` and `phi'(t) >= c2 slope0`, or `None` after
/// [`MAX_BRACKETING_STEPS`] trials. A step cut off by `t_max` is accepted once
/// it satisfies the sufficient-decrease condition. Non-finite trial values
/// count as failures of sufficient decrease.
pub fn weak_wolfe<T>(
    mut phi: impl FnMut(f64) -> Result<Trial<T>>,
    phi0: f64,
    slope0: f64,
    t_max: f64,
    c1: f64,
    c2: f64,
) -> Result<Option<Accepted<T>>> {
    if !(slope0 < 0.0 && t_max > 0.0) {
        return Ok(None);
    }
    let noise = APPROX_ARMIJO_RTOL * phi0.abs().max(1.0);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut t = t_max.min(1.0);
    for _ in 0..MAX_BRACKETING_STEPS {
        match phi(t)? {
            Some((value, slope, payload))
                if value <= phi0 + c1 * t * slope0
                    || (value <= phi0 + noise && slope <= (2.0 * c1 - 1.0) * slope0) =>
            {
                if slope >= c2 * slope0 || t >= t_max {
                    return Ok(Some(Accepted {
                        step: t,
                        value,
                        payload,
                    }));
                }
                lo = t;
            }
            _ => hi = t,
        }
        t = if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            (2.0 * lo).min(t_max)
        };
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(t: f64) -> Result<Trial<()>> {
        Ok(Some(((t - 1.0).powi(2), 2.0 * (t - 1.0), ())))
    }

    fn wolfe_ok(value: f64, slope: f64, t: f64, phi0: f64, slope0: f64) -> bool {
        value <= phi0 + 1e-4 * t * slope0 && slope >= 0.9 * slope0
    }

    #[test]
    fn exact_minimizer_accepted() {
        let out = weak_wolfe(quadratic, 1.0, -2.0, f64::INFINITY, 1e-4, 0.9).unwrap().unwrap();
        assert_eq!(out.step, 1.0);
    }

    #[test]
    fn cap_respected() {
        let out = weak_wolfe(quadratic, 1.0, -2.0, 0.5, 1e-4, 0.9).unwrap().unwrap();
        assert!(out.step <= 0.5);
        assert!(out.value <= 1.0 + 1e-4 * out.step * -2.0);
    }

    #[test]
    fn nonsmooth_ray() {
        let abs = |t: f64| -> Result<Trial<()>> {
            let slope = if t > 1.0 { 1.0 } else { -1.0 };
            Ok(Some(((t - 1.0).abs(), slope, ())))
        };
        let out = weak_wolfe(abs, 1.0, -1.0, f64::INFINITY, 1e-4, 0.9).unwrap().unwrap();
        let (v, s, ()) = abs(out.step).unwrap().unwrap();
        assert!(wolfe_ok(v, s, out.step, 1.0, -1.0));
        assert!((out.step - 1.0).abs() < 1.0);
    }

    #[test]
    fn expands_until_curvature_holds() {
        let far = |t: f64| -> Result<Trial<()>> { Ok(Some(((t - 10.0).powi(2), 2.0 * (t - 10.0), ()))) };
        let out = weak_wolfe(far, 100.0, -20.0, f64::INFINITY, 1e-4, 0.5).unwrap().unwrap();
        let (v, s, ()) = far(out.step).unwrap().unwrap();
        assert!(v <= 100.0 - 1e-4 * out.step * 20.0 && s >= -10.0);
        assert!(out.step > 1.0);
    }

    #[test]
    fn domain_exits_shrink_the_step() {
        let walled = |t: f64| -> Result<Trial<()>> {
            if t > 0.1 {
                Ok(None)
            } else {
                Ok(Some(((t - 0.05).powi(2), 2.0 * (t - 0.05), ())))
            }
        };
        let out = weak_wolfe(walled, 0.0025, -0.1, f64::INFINITY, 1e-4, 0.9).unwrap().unwrap();
        assert!(out.step <= 0.1);
    }

    #[test]
    fn gives_up_on_ascent() {
        let up = |t: f64| -> Result<Trial<()>> { Ok(Some((t, 1.0, ()))) };
        assert!(weak_wolfe(up, 0.0, -1.0, 1.0, 1e-4, 0.9).unwrap().is_none());
    }
}
