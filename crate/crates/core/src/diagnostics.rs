//! Primal recovery, optimality certificates and independent test oracles.

use crate::edges::{Edge, GainEdge};
use crate::error::{Error, Result};
use crate::model::{gather_local, net_flow, Problem};
use crate::solver::{certified_primal_value, relative_gap, DualIterate, DualOracle, Layout, SolveResult};

/// Recovered net flow `y_hat = sum_i A_i x_i` and the per-edge maximizers at `iterate`.
pub fn recover_primal(problem: &Problem, iterate: &DualIterate, tol: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let layout = Layout::extended(problem);
    let z = layout.pack(problem, iterate)?;
    let ev = DualOracle::new(problem, layout, tol, 1)?.eval(&z)?;
    Ok((ev.y_hat, ev.flows))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub dual: f64,
    /// `U(y_hat)` plus the edge utilities of the recovered flows; `-inf` if `y_hat` is infeasible.
    pub primal: f64,
    pub relative: f64,
}

/// Duality gap at `nu` (edge-price offsets zero) against the recovered flows.
pub fn duality_gap(problem: &Problem, nu: &[f64], tol: f64) -> Result<GapReport> {
    let layout = Layout::extended(problem);
    let it = DualIterate {
        nu: nu.to_vec(),
        xi: Vec::new(),
    };
    let z = layout.pack(problem, &it)?;
    let ev = DualOracle::new(problem, layout, tol, 1)?.eval(&z)?;
    let mut primal = problem.objective().u_eval(&ev.y_hat);
    for (i, x) in ev.flows.iter().enumerate() {
        primal += problem.edge_objective(i).v_eval(x);
    }
    Ok(GapReport {
        dual: ev.value,
        primal,
        relative: relative_gap(ev.value, primal),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityReport {
    /// `max_i f_i(eta_i) - eta_i^T x_i` over the reported flows.
    pub max_support_violation: f64,
    /// `max_i |xi_i - grad V_i(x_i)|_inf`.
    pub max_stationarity_violation: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub tol: f64,
}

impl OptimalityReport {
    pub fn passes(&self) -> bool {
        self.max_support_violation <= self.tol
            && self.max_stationarity_violation <= self.tol
            && self.gap <= self.tol
            && self.primal_residual <= self.tol
    }
}

/// Checks the dual optimality conditions for `result`'s prices against its
/// reported flows. Flow infeasibility up to `tol` is absorbed into the gap.
pub fn check_optimality(problem: &Problem, result: &SolveResult, tol: f64) -> Result<OptimalityReport> {
    let nu = &result.nu;
    let objective = problem.objective();
    if result.flows.len() != problem.num_edges() {
        return Err(Error::DimensionMismatch {
            what: "flows",
            expected: problem.num_edges(),
            actual: result.flows.len(),
        });
    }
    let mut support = 0.0_f64;
    let mut stationarity = 0.0_f64;
    let mut dual = objective.ubar(nu);
    for (i, edge) in problem.edges().iter().enumerate() {
        let mut eta = gather_local(nu, edge.map())?;
        let atom = problem.edge_objective(i);
        let xi = result.xi.get(i).filter(|v| !v.is_empty());
        if let Some(xi) = xi {
            for (e, x) in eta.iter_mut().zip(xi) {
                *e += x;
            }
            dual += atom.vbar(xi);
        }
        let (f, _) = edge.support(&eta, 1e-12)?;
        dual += f;
        let x = &result.flows[i];
        let priced: f64 = eta.iter().zip(x).map(|(a, b)| a * b).sum();
        support = support.max(f - priced);
        if !atom.is_zero() {
            let grad_v = atom.v_gradient(x);
            for k in 0..x.len() {
                let offset = xi.map_or(0.0, |v| v[k]);
                stationarity = stationarity.max((offset - grad_v[k]).abs());
            }
        }
    }
    let y_hat = net_flow(&result.flows, problem)?;
    let primal = certified_primal_value(problem, nu, &y_hat, &result.flows, tol);

    let y_star = objective.ubar_maximizer(nu)?;
    let lb = objective.dual_lower_bound();
    let scale = y_hat.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let residual = (0..nu.len())
        .map(|j| {
            let g = y_hat[j] - y_star[j];
            (nu[j] - (nu[j] - g).max(lb[j])).abs()
        })
        .fold(0.0_f64, f64::max)
        / scale;

    Ok(OptimalityReport {
        max_support_violation: support.max(0.0),
        max_stationarity_violation: stationarity,
        gap: relative_gap(dual, primal).max(0.0),
        primal_residual: residual,
        tol,
    })
}

/// Central differences of `field` at `point`.
pub fn finite_diff_grad(field: impl Fn(&[f64]) -> f64, point: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|j| {
            probe[j] = point[j] + step;
            let up = field(&probe);
            probe[j] = point[j] - step;
            let down = field(&probe);
            probe[j] = point[j];
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFiniteProbe { coordinate: j });
            }
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GridOracleResult {
    pub value: f64,
    pub flows: Vec<Vec<f64>>,
}

pub const GRID_ORACLE_MAX_EDGES: usize = 3;

/// Brute-force maximization over edge inputs for tiny problems.
///
/// Each `w_i` ranges over `[0, ub_i]` at spacing `resolution * ub_i`; a second
/// pass regrids one coarse cell around the incumbent at a hundredth of that
/// spacing. The innermost edge is searched by bisection on forward
/// differences, which is exact on a concave slice; slices that are not
/// finite at both ends are scanned linearly.
pub fn grid_oracle(problem: &Problem, resolution: f64) -> Result<GridOracleResult> {
    let m = problem.num_edges();
    if m > GRID_ORACLE_MAX_EDGES {
        return Err(Error::OracleScaleExceeded(format!(
            "{m} edges; at most {GRID_ORACLE_MAX_EDGES} supported"
        )));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::Config("resolution must lie in (0, 1]".into()));
    }
    let edges: Vec<&GainEdge> = problem
        .edges()
        .iter()
        .map(|e| match e {
            Edge::Gain(g) => Ok(g),
            Edge::Hyper(_) => Err(Error::OracleScaleExceeded("hyperedges are not gridded".into())),
        })
        .collect::<Result<_>>()?;

    let coarse: Vec<Axis> = edges
        .iter()
        .map(|e| Axis::new(0.0, e.ub(), resolution * e.ub()))
        .collect();
    let (mut best_w, mut best) = Grid::new(problem, &edges, &coarse).search();
    let fine: Vec<Axis> = edges
        .iter()
        .zip(&best_w)
        .map(|(e, &w)| {
            let h = resolution * e.ub();
            Axis::new((w - h).max(0.0), (w + h).min(e.ub()), h / 100.0)
        })
        .collect();
    let (w, v) = Grid::new(problem, &edges, &fine).search();
    if v > best {
        best_w = w;
        best = v;
    }
    Ok(GridOracleResult {
        value: best,
        flows: edges
            .iter()
            .zip(&best_w)
            .map(|(e, &wi)| vec![-wi, e.gain_eval(wi)])
            .collect(),
    })
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    count: usize,
}

impl Axis {
    fn new(lo: f64, hi: f64, spacing: f64) -> Self {
        let count = ((hi - lo) / spacing).round() as usize + 1;
        Axis { lo, hi, count: count.max(1) }
    }

    fn at(&self, k: usize) -> f64 {
        if self.count == 1 {
            return self.lo;
        }
        if k + 1 == self.count {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * k as f64 / (self.count - 1) as f64
    }
}

/// One gridded search. Edge flows are tabulated per grid point up front.
struct Grid<'a> {
    problem: &'a Problem,
    edges: &'a [&'a GainEdge],
    /// `table[i][k]` is edge `i`'s flow at grid point `k`.
    table: Vec<Vec<[f64; 2]>>,
    k: Vec<usize>,
    y: Vec<f64>,
    best: (Vec<usize>, f64),
}

impl<'a> Grid<'a> {
    fn new(problem: &'a Problem, edges: &'a [&'a GainEdge], axes: &[Axis]) -> Self {
        let table = edges
            .iter()
            .zip(axes)
            .map(|(e, a)| {
                (0..a.count)
                    .map(|k| {
                        let w = a.at(k);
                        [-w, e.gain_eval(w)]
                    })
                    .collect()
            })
            .collect();
        Grid {
            problem,
            edges,
            table,
            k: vec![0; edges.len()],
            y: vec![0.0; problem.num_nodes()],
            best: (vec![0; edges.len()], f64::NEG_INFINITY),
        }
    }

    fn objective(&mut self) -> f64 {
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for (i, e) in self.edges.iter().enumerate() {
            e.map().scatter_add(&self.table[i][self.k[i]], &mut self.y);
        }
        let mut value = self.problem.objective().u_eval(&self.y);
        for i in 0..self.edges.len() {
            value += self.problem.edge_objective(i).v_eval(&self.table[i][self.k[i]]);
        }
        value
    }

    fn search(mut self) -> (Vec<f64>, f64) {
        if self.edges.is_empty() {
            return (Vec::new(), self.objective());
        }
        self.recurse(0);
        let w = self.best.0.iter().enumerate().map(|(i, &k)| -self.table[i][k][0]).collect();
        (w, self.best.1)
    }

    fn eval_at(&mut self, depth: usize, k: usize) -> f64 {
        self.k[depth] = k;
        self.objective()
    }

    fn recurse(&mut self, depth: usize) {
        let count = self.table[depth].len();
        if depth + 1 < self.edges.len() {
            for k in 0..count {
                self.k[depth] = k;
                self.recurse(depth + 1);
            }
            return;
        }
        let first = self.eval_at(depth, 0);
        let last = self.eval_at(depth, count - 1);
        let (k, v) = if first.is_finite() && last.is_finite() {
            // First k with F(k + 1) <= F(k).
            let (mut lo, mut hi) = (0usize, count - 1);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if self.eval_at(depth, mid + 1) > self.eval_at(depth, mid) {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            (lo, self.eval_at(depth, lo))
        } else {
            let mut best = (0, f64::NEG_INFINITY);
            for k in 0..count {
                let v = self.eval_at(depth, k);
                if v > best.1 {
                    best = (k, v);
                }
            }
            best
        };
        if v > self.best.1 {
            self.k[depth] = k;
            self.best = (self.k.clone(), v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edges::Gain;
    use crate::model::IncidenceMap;
    use crate::objectives::ObjectiveAtom;
    use crate::solver::{solve_reduced, SolverConfig};

    fn quad(d: Vec<f64>) -> ObjectiveAtom {
        let k = vec![1.0; d.len()];
        ObjectiveAtom::nonpositive_quadratic(d, k).unwrap()
    }

    fn line(a: usize, b: usize) -> Edge {
        Edge::Gain(GainEdge::new(IncidenceMap::pair(a, b), Gain::PowerLine { alpha: 16.0, beta: 0.25 }, 4.0).unwrap())
    }

    #[test]
    fn recover_primal_examples() {
        let p = Problem::new(2, vec![line(0, 1)], quad(vec![1.0, 2.0]), None).unwrap();
        let (y, flows) = recover_primal(&p, &DualIterate { nu: vec![1.0, 3.0], xi: vec![] }, 1e-10).unwrap();
        assert!((flows[0][0] + 2.77259).abs() < 1e-5);
        assert!((flows[0][1] - 1.83032).abs() < 1e-5);
        assert_eq!(y, net_flow(&flows, &p).unwrap());
        let (y, _) = recover_primal(&p, &DualIterate { nu: vec![2.0, 1.0], xi: vec![] }, 1e-10).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
        let empty = Problem::new(2, vec![], quad(vec![1.0, 2.0]), None).unwrap();
        let (y, _) = recover_primal(&empty, &DualIterate { nu: vec![5.0, 0.1], xi: vec![] }, 1e-10).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn gap_examples() {
        let d = vec![1.0, 2.0];
        let p = Problem::new(2, vec![], quad(d.clone()), None).unwrap();
        // Stationary point nu = kappa * d.
        let at_opt = duality_gap(&p, &d, 1e-10).unwrap();
        assert!(at_opt.relative.abs() <= 1e-10, "{at_opt:?}");
        let off = duality_gap(&p, &[3.0, 0.5], 1e-10).unwrap();
        assert!(off.relative > 0.0);

        let lin = Problem::new(2, vec![line(0, 1)], ObjectiveAtom::linear(vec![1.0, 1.0]).unwrap(), None).unwrap();
        let r = duality_gap(&lin, &[1.0, 3.0], 1e-10).unwrap();
        assert_eq!(r.primal, f64::NEG_INFINITY);
        assert_eq!(r.relative, f64::INFINITY);
    }

    #[test]
    fn finite_diff_examples() {
        let half_sq = |v: &[f64]| 0.5 * v.iter().map(|x| x * x).sum::<f64>();
        let g = finite_diff_grad(half_sq, &[1.0, 2.0], 1e-6).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
        let walled = |v: &[f64]| if v[1] > 2.0 { f64::INFINITY } else { v[0] };
        assert!(matches!(
            finite_diff_grad(walled, &[1.0, 2.0], 1e-6),
            Err(Error::NonFiniteProbe { coordinate: 1 })
        ));
    }

    #[test]
    fn check_optimality_examples() {
        let p = Problem::new(3, vec![line(2, 0), line(2, 1)], quad(vec![1.0, 2.0, 0.0]), None).unwrap();
        let result = solve_reduced(&p, &SolverConfig::default()).unwrap();
        let report = check_optimality(&p, &result, 1e-5).unwrap();
        assert!(report.passes(), "{report:?}");

        let mut perturbed = result.clone();
        perturbed.nu.iter_mut().for_each(|v| *v *= 1.1);
        perturbed.nu[0] *= 1.1;
        let report = check_optimality(&p, &perturbed, 1e-5).unwrap();
        assert!(report.max_support_violation > 1e-5, "{report:?}");

        let empty = Problem::new(2, vec![], quad(vec![1.0, 2.0]), None).unwrap();
        let result = solve_reduced(&empty, &SolverConfig::default()).unwrap();
        let report = check_optimality(&empty, &result, 1e-5).unwrap();
        assert!(report.passes());
        assert_eq!(report.max_support_violation, 0.0);
        assert_eq!(report.max_stationarity_violation, 0.0);
    }

    #[test]
    fn check_optimality_scales_with_prices() {
        let p = Problem::new(3, vec![line(2, 0), line(2, 1)], quad(vec![1.0, 2.0, 0.0]), None).unwrap();
        let mut result = solve_reduced(&p, &SolverConfig::default()).unwrap();
        result.nu[0] *= 1.2;
        let base = check_optimality(&p, &result, 1e-5).unwrap().max_support_violation;
        for t in [0.5, 2.0] {
            let mut scaled = result.clone();
            scaled.nu.iter_mut().for_each(|v| *v *= t);
            let s = check_optimality(&p, &scaled, 1e-5).unwrap().max_support_violation;
            assert!((s - t * base).abs() <= 1e-9 * base.max(1.0), "{s} vs {}", t * base);
        }
    }

    #[test]
    fn grid_oracle_examples() {
        let empty = Problem::new(2, vec![], quad(vec![1.0, 2.0]), None).unwrap();
        assert_eq!(grid_oracle(&empty, 1e-3).unwrap().value, quad(vec![1.0, 2.0]).u_eval(&[0.0, 0.0]));

        let store = Edge::Gain(
            GainEdge::new(IncidenceMap::pair(0, 1), Gain::Storage { gamma: 0.9, eps: 1e-2 }, 10.0).unwrap(),
        );
        let p = Problem::new(2, vec![store], quad(vec![0.0, 3.0]), None).unwrap();
        let oracle = grid_oracle(&p, 1e-3).unwrap();
        let solved = solve_reduced(&p, &SolverConfig::default()).unwrap();
        assert!((oracle.value - solved.primal_value).abs() < 1e-3);

        let path = Problem::new(3, vec![line(0, 1), line(1, 2)], quad(vec![0.0, 0.5, 1.5]), None).unwrap();
        let oracle = grid_oracle(&path, 1e-3).unwrap();
        let solved = solve_reduced(&path, &SolverConfig::default()).unwrap();
        assert!((oracle.value - solved.primal_value).abs() < 1e-3);
        assert!(oracle.value <= solved.primal_value + 1e-9);
    }

    #[test]
    fn grid_oracle_rejects_large_problems() {
        let edges = (0..4).map(|_| line(0, 1)).collect();
        let p = Problem::new(2, edges, quad(vec![1.0, 1.0]), None).unwrap();
        assert!(matches!(grid_oracle(&p, 1e-2), Err(Error::OracleScaleExceeded(_))));
    }
}
