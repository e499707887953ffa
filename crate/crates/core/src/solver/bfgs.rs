use super::line_search::{weak_wolfe, Trial};
use super::{dot, inf_norm, DualEval, DualOracle, Mode, Progress, SolveResult, SolverConfig, Status};
use crate::error::{Error, Result};

/// Dense inverse-Hessian approximation.
struct InverseHessian {
    n: usize,
    h: Vec<f64>,
    scaled: bool,
}

impl InverseHessian {
    fn identity(n: usize) -> Self {
        let mut h = vec![0.0; n * n];
        for j in 0..n {
            h[j * n + j] = 1.0;
        }
        InverseHessian { n, h, scaled: false }
    }

    /// `-H g` restricted to the free coordinates.
    fn direction(&self, grad: &[f64], free: &[bool]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                if !free[i] {
                    return 0.0;
                }
                let row = &self.h[i * n..(i + 1) * n];
                -(0..n).filter(|&j| free[j]).map(|j| row[j] * grad[j]).sum::<f64>()
            })
            .collect()
    }

    fn update(&mut self, s: &[f64], y: &[f64]) -> bool {
        let sy = dot(s, y);
        let (ns, ny) = (dot(s, s).sqrt(), dot(y, y).sqrt());
        if !(sy > 1e-12 * ns * ny) {
            return false;
        }
        let n = self.n;
        if !self.scaled {
            let gamma = sy / dot(y, y);
            self.h.iter_mut().for_each(|v| *v *= gamma);
            self.scaled = true;
        }
        let rho = 1.0 / sy;
        let hy: Vec<f64> = (0..n).map(|i| dot(&self.h[i * n..(i + 1) * n], y)).collect();
        let yhy = dot(y, &hy);
        let coeff = rho * rho * yhy + rho;
        for i in 0..n {
            for j in 0..n {
                self.h[i * n + j] += coeff * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
            }
        }
        true
    }
}

/// Search direction handling the lower bounds.
///
/// Coordinates within `eps` of their bound whose gradient points outward are
/// sent straight toward the bound (`p_j = lb_j - z_j`). Coordinates within
/// `eps` that the quasi-Newton direction would still push outward are held.
/// The rest follow `-H g` restricted to the free set, which is returned
/// alongside the direction.
fn bounded_direction(hess: &InverseHessian, z: &[f64], grad: &[f64], lb: &[f64], eps: f64) -> (Vec<f64>, Vec<bool>) {
    let n = z.len();
    let near: Vec<bool> = (0..n).map(|j| z[j] - lb[j] <= eps * lb[j].abs().max(1.0)).collect();
    let mut free: Vec<bool> = (0..n).map(|j| !(near[j] && grad[j] > 0.0)).collect();
    let mut p = hess.direction(grad, &free);
    for _ in 0..n {
        let held: Vec<usize> = (0..n).filter(|&j| free[j] && near[j] && p[j] < 0.0).collect();
        if held.is_empty() {
            break;
        }
        for j in held {
            free[j] = false;
        }
        p = hess.direction(grad, &free);
    }
    for j in 0..n {
        if near[j] && grad[j] > 0.0 {
            p[j] = lb[j] - z[j];
        }
    }
    (p, free)
}

/// Largest step keeping every coordinate a fraction `theta` of the way to its bound.
fn step_cap(z: &[f64], p: &[f64], lb: &[f64], theta: f64) -> f64 {
    let mut t = f64::INFINITY;
    for j in 0..z.len() {
        if p[j] < 0.0 {
            t = t.min((z[j] - lb[j]) / -p[j]);
        }
    }
    theta * t
}

/// Width of the zone next to a bound inside which coordinates may be held or
/// driven to the bound; it shrinks with the projected gradient.
const BOUND_ZONE: f64 = 1e-3;

pub(super) fn run(oracle: &DualOracle, cfg: &SolverConfig, mut z: Vec<f64>) -> Result<SolveResult> {
    let n = z.len();
    let mut progress = Progress::new(oracle, cfg);
    let lb = progress.lower_bounds().to_vec();
    let mut ev = oracle.eval(&z)?;
    let mut assessment = progress.assess(&z, &ev);
    progress.record(&ev, &assessment, 0.0);
    let mut hess = InverseHessian::identity(n);

    let mut status = Status::MaxIter;
    for _ in 0..cfg.max_iter {
        if progress.converged(&assessment) {
            status = Status::Optimal;
            break;
        }
        let eps = inf_norm(&progress.projected_gradient(&z, &ev.grad)).min(BOUND_ZONE);
        let mut accepted = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if !hess.scaled {
                    break;
                }
                hess = InverseHessian::identity(n);
            }
            let (mut p, mut free) = bounded_direction(&hess, &z, &ev.grad, &lb, eps);
            let mut slope0 = dot(&ev.grad, &p);
            if !(slope0 < 0.0) {
                hess = InverseHessian::identity(n);
                (p, free) = bounded_direction(&hess, &z, &ev.grad, &lb, eps);
                slope0 = dot(&ev.grad, &p);
                if !(slope0 < 0.0) {
                    break;
                }
            }
            let t_max = step_cap(&z, &p, &lb, cfg.theta);
            let phi = |t: f64| -> Result<Trial<(Vec<f64>, DualEval)>> {
                let zt: Vec<f64> = z.iter().zip(&p).map(|(a, b)| a + t * b).collect();
                match oracle.eval(&zt) {
                    Ok(e) => Ok(Some((e.value, dot(&e.grad, &p), (zt, e)))),
                    Err(Error::LeftDualDomain) | Err(Error::ConjugateBoundary { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            };
            if let Some(out) = weak_wolfe(phi, ev.value, slope0, t_max, cfg.c1, cfg.c2)? {
                accepted = Some((out, free));
                break;
            }
        }
        let Some((out, free)) = accepted else {
            status = Status::LineSearchFailure;
            break;
        };
        let (z_new, ev_new) = out.payload;
        let s: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
        // Curvature is learned on the free subspace only: gradient changes on
        // held coordinates say nothing about the reduced problem.
        let y: Vec<f64> = (0..n)
            .map(|j| if free[j] { ev_new.grad[j] - ev.grad[j] } else { 0.0 })
            .collect();
        hess.update(&s, &y);
        z = z_new;
        ev = ev_new;
        assessment = progress.assess(&z, &ev);
        progress.record(&ev, &assessment, out.step);
    }
    if status == Status::MaxIter && progress.converged(&assessment) {
        status = Status::Optimal;
    }
    Ok(progress.finish(status, Mode::Reduced, &z, ev, &assessment))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_satisfies_secant_equation() {
        let mut h = InverseHessian::identity(3);
        let s = [1.0, -0.5, 0.25];
        let y = [2.0, -0.3, 0.4];
        assert!(h.update(&s, &y));
        let hy: Vec<f64> = (0..3).map(|i| dot(&h.h[i * 3..i * 3 + 3], &y)).collect();
        for k in 0..3 {
            assert!((hy[k] - s[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn update_skipped_without_curvature() {
        let mut h = InverseHessian::identity(2);
        assert!(!h.update(&[1.0, 0.0], &[-1.0, 0.0]));
        assert_eq!(h.h, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn cap_stops_short_of_bound() {
        let t = step_cap(&[1.0, 2.0], &[-1.0, 1.0], &[0.0, 0.0], 0.995);
        assert!((t - 0.995).abs() < 1e-15);
        assert_eq!(step_cap(&[1.0], &[1.0], &[0.0], 0.995), f64::INFINITY);
    }

    #[test]
    fn direction_near_bounds() {
        let h = InverseHessian::identity(3);
        let z = [1.0 + 1e-6, 1.5, 1.0 + 1e-6];
        let (p, free) = bounded_direction(&h, &z, &[1.0, 1.0, -1.0], &[1.0, 1.0, 1.0], 1e-3);
        assert!((p[0] + 1e-6).abs() < 1e-15);
        assert_eq!(p[1], -1.0);
        assert_eq!(p[2], 1.0);
        assert_eq!(free, vec![false, true, true]);
    }

    #[test]
    fn quasi_newton_push_is_held() {
        // Off-diagonal curvature would drive coordinate 1 into its bound.
        let mut h = InverseHessian::identity(2);
        h.h = vec![1.0, 0.9, 0.9, 1.0];
        let (p, free) = bounded_direction(&h, &[2.0, 1e-6], &[1.0, -0.1], &[0.0, 0.0], 1e-3);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[0], -1.0);
        assert_eq!(free, vec![true, false]);
    }
}
