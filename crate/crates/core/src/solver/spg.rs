use std::collections::VecDeque;

use super::line_search::MAX_BRACKETING_STEPS;
use super::{dot, DualOracle, Mode, Progress, SolveResult, SolverConfig, Status};
use crate::error::{Error, Result};

const ALPHA_MIN: f64 = 1e-12;
const ALPHA_MAX: f64 = 1e12;

pub(super) fn run(oracle: &DualOracle, cfg: &SolverConfig, z0: Vec<f64>) -> Result<SolveResult> {
    let mut progress = Progress::new(oracle, cfg);
    let n = oracle.layout().num_nodes();
    let floor: Vec<f64> = progress
        .lower_bounds()
        .iter()
        .enumerate()
        .map(|(j, &l)| if j < n { l + cfg.nu_floor } else { l })
        .collect();
    let project = |v: &mut [f64]| {
        for (x, f) in v.iter_mut().zip(&floor) {
            *x = x.max(*f);
        }
    };

    let mut z = z0;
    project(&mut z);
    let mut ev = oracle.eval(&z)?;
    let mut assessment = progress.assess(&z, &ev);
    progress.record(&ev, &assessment, 0.0);
    let mut history: VecDeque<f64> = VecDeque::from([ev.value]);
    let mut alpha = (1.0 / assessment.grad_inf.max(1e-300)).clamp(ALPHA_MIN, 1.0);

    let mut status = Status::MaxIter;
    for _ in 0..cfg.max_iter {
        if progress.converged(&assessment) {
            status = Status::Optimal;
            break;
        }
        let mut target: Vec<f64> = z.iter().zip(&ev.grad).map(|(a, g)| a - alpha * g).collect();
        project(&mut target);
        let d: Vec<f64> = target.iter().zip(&z).map(|(a, b)| a - b).collect();
        let slope = dot(&ev.grad, &d);
        if !(slope < 0.0) {
            status = Status::LineSearchFailure;
            break;
        }
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BRACKETING_STEPS {
            let zt: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let trial = match oracle.eval(&zt) {
                Ok(e) => Some(e),
                Err(Error::LeftDualDomain) | Err(Error::ConjugateBoundary { .. }) => None,
                Err(e) => return Err(e),
            };
            match trial {
                Some(e) if e.value.is_finite() && e.value <= reference + cfg.c1 * t * slope => {
                    accepted = Some((zt, e, t));
                    break;
                }
                Some(e) if e.value.is_finite() => {
                    // Safeguarded quadratic interpolation.
                    let curv = e.value - ev.value - t * slope;
                    let t_q = if curv > 0.0 { -slope * t * t / (2.0 * curv) } else { 0.5 * t };
                    t = t_q.clamp(0.1 * t, 0.5 * t);
                }
                _ => t *= 0.5,
            }
        }
        let Some((z_new, ev_new, step)) = accepted else {
            status = Status::LineSearchFailure;
            break;
        };
        let s: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = ev_new.grad.iter().zip(&ev.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        alpha = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(ALPHA_MIN, ALPHA_MAX)
        } else {
            ALPHA_MAX
        };
        z = z_new;
        ev = ev_new;
        assessment = progress.assess(&z, &ev);
        progress.record(&ev, &assessment, step);
        history.push_back(ev.value);
        if history.len() > cfg.spg_memory {
            history.pop_front();
        }
    }
    if status != Status::Optimal && progress.converged(&assessment) {
        status = Status::Optimal;
    }
    Ok(progress.finish(status, Mode::Extended, &z, ev, &assessment))
}
