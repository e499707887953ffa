//! Dual function evaluation with a parallel edge sweep.

use rayon::prelude::*;

use crate::edges::Edge;
use crate::error::{Error, Result};
use crate::model::Problem;

/// Dual point. `xi[i]` is the edge-price offset of edge `i`; it is empty for
/// edges whose edge objective is zero, and `xi` itself is empty in reduced mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualIterate {
    pub nu: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
}

/// Output of one dual evaluation.
#[derive(Debug, Clone)]
pub struct DualEval {
    pub value: f64,
    /// Gradient over the packed variable (`nu` first, then the `xi` blocks).
    pub grad: Vec<f64>,
    /// Recovered net flow `sum_i A_i x_i`.
    pub y_hat: Vec<f64>,
    /// Per-edge arbitrage maximizers.
    pub flows: Vec<Vec<f64>>,
    /// Network subproblem maximizer `y*(nu)`.
    pub y_star: Vec<f64>,
}

/// Packs `(nu, xi_1, ..., xi_m)` into one vector. Only edges with a nonzero
/// edge objective carry a `xi` block.
#[derive(Debug, Clone)]
pub struct Layout {
    num_nodes: usize,
    offsets: Vec<Option<usize>>,
    len: usize,
}

impl Layout {
    pub fn reduced(problem: &Problem) -> Self {
        Layout {
            num_nodes: problem.num_nodes(),
            offsets: vec![None; problem.num_edges()],
            len: problem.num_nodes(),
        }
    }

    pub fn extended(problem: &Problem) -> Self {
        let mut len = problem.num_nodes();
        let offsets = (0..problem.num_edges())
            .map(|i| {
                if problem.edge_objective(i).is_zero() {
                    None
                } else {
                    let at = len;
                    len += problem.edges()[i].map().len();
                    Some(at)
                }
            })
            .collect();
        Layout {
            num_nodes: problem.num_nodes(),
            offsets,
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn is_reduced(&self) -> bool {
        self.len == self.num_nodes
    }

    pub fn offset(&self, edge: usize) -> Option<usize> {
        self.offsets[edge]
    }

    pub fn pack(&self, problem: &Problem, it: &DualIterate) -> Result<Vec<f64>> {
        if it.nu.len() != self.num_nodes {
            return Err(Error::DimensionMismatch {
                what: "nu",
                expected: self.num_nodes,
                actual: it.nu.len(),
            });
        }
        let mut z = it.nu.clone();
        z.resize(self.len, 0.0);
        if it.xi.is_empty() {
            return Ok(z);
        }
        if it.xi.len() != problem.num_edges() {
            return Err(Error::DimensionMismatch {
                what: "xi",
                expected: problem.num_edges(),
                actual: it.xi.len(),
            });
        }
        for (i, xi) in it.xi.iter().enumerate() {
            let ni = problem.edges()[i].map().len();
            match self.offsets[i] {
                Some(at) if xi.len() == ni => z[at..at + ni].copy_from_slice(xi),
                Some(_) if xi.is_empty() => {}
                None if xi.is_empty() || xi.iter().all(|&v| v == 0.0) => {}
                _ => {
                    return Err(Error::InvalidDualPrices(format!(
                        "xi block of edge {i} does not match its edge objective"
                    )))
                }
            }
        }
        Ok(z)
    }

    pub fn unpack(&self, problem: &Problem, z: &[f64]) -> DualIterate {
        let xi = if self.is_reduced() {
            Vec::new()
        } else {
            (0..problem.num_edges())
                .map(|i| match self.offsets[i] {
                    Some(at) => z[at..at + problem.edges()[i].map().len()].to_vec(),
                    None => Vec::new(),
                })
                .collect()
        };
        DualIterate {
            nu: z[..self.num_nodes].to_vec(),
            xi,
        }
    }
}

/// Evaluates the dual function for one problem, reusing a worker pool.
pub struct DualOracle<'a> {
    problem: &'a Problem,
    layout: Layout,
    tol: f64,
    pool: Option<rayon::ThreadPool>,
}

/// Below this many edges per worker the sweep stays on the calling thread.
const MIN_EDGES_PER_TASK: usize = 8;

impl<'a> DualOracle<'a> {
    pub fn new(problem: &'a Problem, layout: Layout, tol: f64, threads: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Config("subproblem tolerance must be positive".into()));
        }
        let pool = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(DualOracle {
            problem,
            layout,
            tol,
            pool,
        })
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn edge_support(&self, i: usize, edge: &Edge, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let map = edge.map();
        let mut eta = vec![0.0; map.len()];
        map.gather_into(&z[..self.layout.num_nodes], &mut eta);
        if let Some(at) = self.layout.offset(i) {
            for (k, e) in eta.iter_mut().enumerate() {
                *e += z[at + k];
            }
        }
        edge.support(&eta, self.tol)
    }

    fn sweep(&self, z: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
        let edges = self.problem.edges();
        match &self.pool {
            Some(pool) if edges.len() >= 2 * MIN_EDGES_PER_TASK => pool.install(|| {
                edges
                    .par_iter()
                    .enumerate()
                    .with_min_len(MIN_EDGES_PER_TASK)
                    .map(|(i, e)| self.edge_support(i, e, z))
                    .collect()
            }),
            _ => edges
                .iter()
                .enumerate()
                .map(|(i, e)| self.edge_support(i, e, z))
                .collect(),
        }
    }

    /// `g(z)` and its gradient. Fails if `z` is outside the dual domain.
    pub fn eval(&self, z: &[f64]) -> Result<DualEval> {
        let problem = self.problem;
        let n = self.layout.num_nodes;
        let nu = &z[..n];
        let objective = problem.objective();
        let ubar = objective.ubar(nu);
        if !ubar.is_finite() {
            return Err(Error::LeftDualDomain);
        }
        let y_star = objective.ubar_maximizer(nu)?;

        let mut value = ubar;
        let mut grad = vec![0.0; self.layout.len];
        for j in 0..n {
            grad[j] = -y_star[j];
        }
        let mut y_hat = vec![0.0; n];
        let supports = self.sweep(z)?;
        let mut flows = Vec::with_capacity(supports.len());
        for (i, (f, x)) in supports.into_iter().enumerate() {
            let map = problem.edges()[i].map();
            value += f;
            map.scatter_add(&x, &mut y_hat);
            if let Some(at) = self.layout.offset(i) {
                let xi = &z[at..at + x.len()];
                let atom = problem.edge_objective(i);
                let vbar = atom.vbar(xi);
                if !vbar.is_finite() {
                    return Err(Error::LeftDualDomain);
                }
                value += vbar;
                let x_edge = atom.vbar_maximizer(xi);
                for k in 0..x.len() {
                    grad[at + k] = x[k] - x_edge[k];
                }
            }
            flows.push(x);
        }
        for j in 0..n {
            grad[j] += y_hat[j];
        }
        Ok(DualEval {
            value,
            grad,
            y_hat,
            flows,
            y_star,
        })
    }

    /// Evaluates `g` only, mapping domain exits to `+inf`.
    pub fn value(&self, z: &[f64]) -> Result<f64> {
        match self.eval(z) {
            Ok(ev) => Ok(ev.value),
            Err(Error::LeftDualDomain) | Err(Error::ConjugateBoundary { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Componentwise lower bounds of the packed variable.
    pub fn lower_bounds(&self) -> Vec<f64> {
        let mut lb = self.problem.objective().dual_lower_bound();
        lb.resize(self.layout.len, 0.0);
        lb
    }
}

/// `g(nu)` in reduced form: `Ubar(nu) + sum_i f_i(A_i^T nu)`.
pub fn dual_eval(problem: &Problem, nu: &[f64], subproblem_tol: f64) -> Result<DualEval> {
    if nu.len() != problem.num_nodes() {
        return Err(Error::DimensionMismatch {
            what: "nu",
            expected: problem.num_nodes(),
            actual: nu.len(),
        });
    }
    DualOracle::new(problem, Layout::reduced(problem), subproblem_tol, 1)?.eval(nu)
}

/// `g(nu, xi) = Ubar(nu) + sum_i (Vbar_i(xi_i) + f_i(xi_i + A_i^T nu))`.
pub fn dual_eval_extended(
    problem: &Problem,
    iterate: &DualIterate,
    subproblem_tol: f64,
) -> Result<DualEval> {
    let layout = Layout::extended(problem);
    let z = layout.pack(problem, iterate)?;
    DualOracle::new(problem, layout, subproblem_tol, 1)?.eval(&z)
}
