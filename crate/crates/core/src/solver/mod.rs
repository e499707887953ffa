//! Dual solvers: full-memory BFGS for the reduced dual and spectral projected
//! gradient for the extended dual.

mod bfgs;
mod dual;
pub mod line_search;
mod spg;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use dual::{dual_eval, dual_eval_extended, DualEval, DualIterate, DualOracle, Layout};

use crate::error::{Error, Result};
use crate::model::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Extended iff some edge objective is nonzero.
    #[default]
    Auto,
    Reduced,
    Extended,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Mode::Auto),
            "reduced" => Ok(Mode::Reduced),
            "extended" => Ok(Mode::Extended),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: Mode,
    /// Relative projected-gradient tolerance.
    pub tol_grad: f64,
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Largest relative distance from `dom U` at which a recovered net flow is
    /// still credited with a primal value.
    pub tol_feas: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub c2: f64,
    /// Fraction of the distance to the dual boundary a BFGS step may cover.
    pub theta: f64,
    /// Nonmonotone window of the projected-gradient line search.
    pub spg_memory: usize,
    pub threads: usize,
    pub subproblem_tol: f64,
    /// Margin kept above the dual lower bound by the extended-mode projection.
    pub nu_floor: f64,
    pub initial_nu: Option<Vec<f64>>,
    /// When false the trace's wall-time column is zero, making traces reproducible byte for byte.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::Auto,
            tol_grad: 1e-8,
            tol_gap: 1e-7,
            tol_feas: 1e-6,
            max_iter: 1000,
            c1: 1e-4,
            c2: 0.9,
            theta: 0.995,
            spg_memory: 10,
            threads: 1,
            subproblem_tol: 1e-10,
            nu_floor: 1e-12,
            initial_nu: None,
            record_time: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_grad", self.tol_grad),
            ("tol_gap", self.tol_gap),
            ("tol_feas", self.tol_feas),
            ("subproblem_tol", self.subproblem_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config("line search requires 0 < c1 < c2 < 1".into()));
        }
        if !(0.0 < self.theta && self.theta < 1.0) {
            return Err(Error::Config("theta must lie in (0, 1)".into()));
        }
        if self.threads == 0 || self.spg_memory == 0 {
            return Err(Error::Config("threads and spg_memory must be at least 1".into()));
        }
        if !(self.nu_floor >= 0.0) {
            return Err(Error::Config("nu_floor must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    MaxIter,
    LineSearchFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::MaxIter => "max_iter",
            Status::LineSearchFailure => "line_search_failure",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(Status::Optimal),
            "max_iter" => Ok(Status::MaxIter),
            "line_search_failure" => Ok(Status::LineSearchFailure),
            other => Err(Error::Config(format!("unknown status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub g: f64,
    /// Infinity norm of the projected gradient.
    pub grad_inf: f64,
    pub rel_gap: f64,
    pub primal_resid: f64,
    pub step: f64,
    pub time_s: f64,
    /// Primal value credited to the recovered flows at this row.
    pub primal_value: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    /// The mode actually run (never `Auto`).
    pub mode: Mode,
    pub dual_value: f64,
    pub primal_value: f64,
    pub relative_gap: f64,
    pub relative_grad: f64,
    pub primal_residual: f64,
    pub nu: Vec<f64>,
    /// Edge-price offsets, empty in reduced mode.
    pub xi: Vec<Vec<f64>>,
    pub y_hat: Vec<f64>,
    pub flows: Vec<Vec<f64>>,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    pub wall_time_seconds: f64,
}

impl SolveResult {
    pub fn iterate(&self) -> DualIterate {
        DualIterate {
            nu: self.nu.clone(),
            xi: self.xi.clone(),
        }
    }
}

/// Convergence measures at one iterate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Assessment {
    pub grad_inf: f64,
    pub rel_grad: f64,
    pub primal_resid: f64,
    pub primal_value: f64,
    pub rel_gap: f64,
}

/// Relative duality gap `(g - p) / max(1, |g|)`.
pub fn relative_gap(dual: f64, primal: f64) -> f64 {
    if primal == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    (dual - primal) / dual.abs().max(1.0)
}

/// Primal value credited to recovered flows at prices `nu`; see
/// [`ObjectiveAtom::certified_value`](crate::objectives::ObjectiveAtom::certified_value).
pub fn certified_primal_value(
    problem: &Problem,
    nu: &[f64],
    y_hat: &[f64],
    flows: &[Vec<f64>],
    tol_feas: f64,
) -> f64 {
    let mut value = problem.objective().certified_value(y_hat, nu, tol_feas);
    for (i, x) in flows.iter().enumerate() {
        let atom = problem.edge_objective(i);
        if !atom.is_zero() {
            value += atom.v_eval(x);
        }
    }
    value
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shared bookkeeping for both solvers.
pub(crate) struct Progress<'a, 'o> {
    oracle: &'a DualOracle<'o>,
    cfg: &'a SolverConfig,
    lb: Vec<f64>,
    start: Instant,
    trace: Vec<TraceRow>,
}

impl<'a, 'o> Progress<'a, 'o> {
    pub fn new(oracle: &'a DualOracle<'o>, cfg: &'a SolverConfig) -> Self {
        Progress {
            lb: oracle.lower_bounds(),
            oracle,
            cfg,
            start: Instant::now(),
            trace: Vec::new(),
        }
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lb
    }

    /// Projected gradient `z - P(z - grad)` for the box `z >= lb`.
    pub fn projected_gradient(&self, z: &[f64], grad: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(grad)
            .zip(&self.lb)
            .map(|((&zj, &gj), &lj)| zj - (zj - gj).max(lj))
            .collect()
    }

    pub fn assess(&self, z: &[f64], ev: &DualEval) -> Assessment {
        let n = self.oracle.layout().num_nodes();
        let pg = self.projected_gradient(z, &ev.grad);
        let scale = inf_norm(&ev.y_hat).max(1.0);
        let grad_inf = inf_norm(&pg);
        let primal_value = certified_primal_value(
            self.oracle.problem(),
            &z[..n],
            &ev.y_hat,
            &ev.flows,
            self.cfg.tol_feas,
        );
        Assessment {
            grad_inf,
            rel_grad: grad_inf / scale,
            primal_resid: inf_norm(&pg[..n]) / scale,
            primal_value,
            rel_gap: relative_gap(ev.value, primal_value),
        }
    }

    pub fn converged(&self, a: &Assessment) -> bool {
        a.rel_gap <= self.cfg.tol_gap && a.rel_grad <= self.cfg.tol_grad
    }

    pub fn record(&mut self, ev: &DualEval, a: &Assessment, step: f64) {
        let time_s = if self.cfg.record_time {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        self.trace.push(TraceRow {
            iter: self.trace.len(),
            g: ev.value,
            grad_inf: a.grad_inf,
            rel_gap: a.rel_gap,
            primal_resid: a.primal_resid,
            step,
            time_s,
            primal_value: a.primal_value,
        });
    }

    pub fn finish(self, status: Status, mode: Mode, z: &[f64], ev: DualEval, a: &Assessment) -> SolveResult {
        let problem = self.oracle.problem();
        let it = self.oracle.layout().unpack(problem, z);
        SolveResult {
            status,
            mode,
            dual_value: ev.value,
            primal_value: a.primal_value,
            relative_gap: a.rel_gap,
            relative_grad: a.rel_grad,
            primal_residual: a.primal_resid,
            nu: it.nu,
            xi: it.xi,
            y_hat: ev.y_hat,
            flows: ev.flows,
            iterations: self.trace.len().saturating_sub(1),
            wall_time_seconds: self.start.elapsed().as_secs_f64(),
            trace: self.trace,
        }
    }
}

/// Resolves `Auto` against the problem's edge objectives.
pub fn resolve_mode(problem: &Problem, mode: Mode) -> Result<Mode> {
    match mode {
        Mode::Auto if problem.has_zero_edge_objectives() => Ok(Mode::Reduced),
        Mode::Auto => Ok(Mode::Extended),
        Mode::Reduced if !problem.has_zero_edge_objectives() => Err(Error::Config(
            "reduced mode requires every edge objective to be zero".into(),
        )),
        m => Ok(m),
    }
}

fn initial_nu(problem: &Problem, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let objective = problem.objective();
    let nu = match &cfg.initial_nu {
        Some(nu) => nu.clone(),
        None => objective.initial_dual()?,
    };
    if nu.len() != problem.num_nodes() {
        return Err(Error::DimensionMismatch {
            what: "initial nu",
            expected: problem.num_nodes(),
            actual: nu.len(),
        });
    }
    let lb = objective.dual_lower_bound();
    let interior = nu.iter().zip(&lb).all(|(v, l)| v.is_finite() && v > l);
    if !interior || !objective.ubar(&nu).is_finite() {
        return Err(Error::InvalidDualPrices(
            "initial nu must be strictly inside the dual domain".into(),
        ));
    }
    Ok(nu)
}

/// Solves the reduced dual by BFGS. All edge objectives must be zero.
pub fn solve_reduced(problem: &Problem, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    resolve_mode(problem, Mode::Reduced)?;
    let oracle = DualOracle::new(problem, Layout::reduced(problem), cfg.subproblem_tol, cfg.threads)?;
    bfgs::run(&oracle, cfg, initial_nu(problem, cfg)?)
}

/// Solves the extended dual by spectral projected gradient. Problems whose
/// edge objectives are all zero are handed to [`solve_reduced`].
pub fn solve_extended(problem: &Problem, cfg: &SolverConfig) -> Result<SolveResult> {
    if problem.has_zero_edge_objectives() {
        return solve_reduced(problem, cfg);
    }
    cfg.validate()?;
    let layout = Layout::extended(problem);
    let mut z = initial_nu(problem, cfg)?;
    z.resize(layout.len(), 0.0);
    let oracle = DualOracle::new(problem, layout, cfg.subproblem_tol, cfg.threads)?;
    spg::run(&oracle, cfg, z)
}

/// Solves in the configured mode.
pub fn solve(problem: &Problem, cfg: &SolverConfig) -> Result<SolveResult> {
    match resolve_mode(problem, cfg.mode)? {
        Mode::Reduced => solve_reduced(problem, cfg),
        _ => solve_extended(problem, cfg),
    }
}
