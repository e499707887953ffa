//! Network and edge utilities together with their conjugate-like subproblems.
//!
//! For a network utility `U` the subproblem is `Ubar(nu) = sup_y U(y) - nu^T y`,
//! with maximizer `y*(nu)` and gradient `-y*(nu)`. Edge utilities `V_i` have the
//! analogous `Vbar_i(xi) = sup_x V_i(x) - xi^T x`. Infinite values are ordinary
//! `f64` infinities: `-inf` for an infeasible flow, `+inf` outside the domain of
//! a conjugate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// User-supplied network utility. Implementations must be re-entrant: the
/// solver may call them from worker threads.
pub trait CustomObjective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn u(&self, y: &[f64]) -> f64;
    fn ubar(&self, nu: &[f64]) -> f64;
    /// Maximizer `y*(nu)`; the gradient of `Ubar` is its negation.
    fn maximizer(&self, nu: &[f64]) -> Vec<f64>;
    fn initial_dual(&self) -> Vec<f64>;
    /// Componentwise lower boundary of the domain of `Ubar`.
    fn dual_lower_bound(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
    /// Nearest point of `dom U`, used to correct near-feasible recovered flows.
    fn project_domain(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
}

/// User-supplied edge utility.
pub trait CustomEdgeObjective: Send + Sync + fmt::Debug {
    fn v(&self, x: &[f64]) -> f64;
    fn vbar(&self, xi: &[f64]) -> f64;
    fn maximizer(&self, xi: &[f64]) -> Vec<f64>;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub enum ObjectiveAtom {
    /// `U(y) = c^T y` on `y >= 0`.
    Linear { c: Vec<f64> },
    /// `U(y) = -sum_j (kappa_j / 2) (d_j - y_j)_+^2`.
    NonpositiveQuadratic { demand: Vec<f64>, kappa: Vec<f64> },
    /// Buyers `0..n_b` get `b_i log y_i`; goods `n_b..` carry `y_g >= -1` and a
    /// small quadratic `-(eps/2) y_g^2`.
    FisherBudget {
        budgets: Vec<f64>,
        num_goods: usize,
        eps_good: f64,
    },
    Custom(Arc<dyn CustomObjective>),
}

pub const DEFAULT_EPS_GOOD: f64 = 1e-8;

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be finite")))
    }
}

impl ObjectiveAtom {
    pub fn linear(c: Vec<f64>) -> Result<Self> {
        check_finite("linear prices", &c)?;
        if c.iter().any(|&cj| cj < 0.0) {
            return Err(Error::Config("linear prices must be nonnegative".into()));
        }
        Ok(ObjectiveAtom::Linear { c })
    }

    pub fn nonpositive_quadratic(demand: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        check_finite("demand", &demand)?;
        check_finite("kappa", &kappa)?;
        if demand.len() != kappa.len() {
            return Err(Error::DimensionMismatch {
                what: "kappa",
                expected: demand.len(),
                actual: kappa.len(),
            });
        }
        if kappa.iter().any(|&k| k <= 0.0) {
            return Err(Error::Config("kappa must be positive".into()));
        }
        Ok(ObjectiveAtom::NonpositiveQuadratic { demand, kappa })
    }

    pub fn fisher(budgets: Vec<f64>, num_goods: usize, eps_good: f64) -> Result<Self> {
        check_finite("budgets", &budgets)?;
        if budgets.iter().any(|&b| b <= 0.0) {
            return Err(Error::Config("budgets must be positive".into()));
        }
        if !(eps_good > 0.0 && eps_good.is_finite()) {
            return Err(Error::Config("eps_good must be positive".into()));
        }
        Ok(ObjectiveAtom::FisherBudget {
            budgets,
            num_goods,
            eps_good,
        })
    }

    /// Number of nodes the atom expects, when it is fixed by its parameters.
    pub fn dim(&self) -> Option<usize> {
        Some(match self {
            ObjectiveAtom::Linear { c } => c.len(),
            ObjectiveAtom::NonpositiveQuadratic { demand, .. } => demand.len(),
            ObjectiveAtom::FisherBudget {
                budgets, num_goods, ..
            } => budgets.len() + num_goods,
            ObjectiveAtom::Custom(c) => c.dim(),
        })
    }

    /// `U(y)`.
    pub fn u_eval(&self, y: &[f64]) -> f64 {
        match self {
            ObjectiveAtom::Custom(c) => c.u(y),
            _ => (0..y.len())
                .map(|j| self.separable_term(j, y[j]).unwrap_or(f64::NEG_INFINITY))
                .sum(),
        }
    }

    /// Contribution of node `j` to `U` for the separable built-ins.
    pub fn separable_term(&self, j: usize, yj: f64) -> Option<f64> {
        Some(match self {
            ObjectiveAtom::Linear { c } => {
                if yj < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    c[j] * yj
                }
            }
            ObjectiveAtom::NonpositiveQuadratic { demand, kappa } => {
                let short = (demand[j] - yj).max(0.0);
                -0.5 * kappa[j] * short * short
            }
            ObjectiveAtom::FisherBudget {
                budgets, eps_good, ..
            } => {
                if j < budgets.len() {
                    if yj <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        budgets[j] * yj.ln()
                    }
                } else if yj < -1.0 {
                    f64::NEG_INFINITY
                } else {
                    -0.5 * eps_good * yj * yj
                }
            }
            ObjectiveAtom::Custom(_) => return None,
        })
    }

    /// `Ubar(nu) = sup_y U(y) - nu^T y`.
    pub fn ubar(&self, nu: &[f64]) -> f64 {
        match self {
            ObjectiveAtom::Linear { c } => {
                if nu.iter().zip(c).all(|(n, cj)| n >= cj) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ObjectiveAtom::NonpositiveQuadratic { demand, kappa } => {
                let mut total = 0.0;
                for j in 0..nu.len() {
                    if nu[j] < 0.0 {
                        return f64::INFINITY;
                    }
                    total += nu[j] * nu[j] / (2.0 * kappa[j]) - demand[j] * nu[j];
                }
                total
            }
            ObjectiveAtom::FisherBudget {
                budgets, eps_good, ..
            } => {
                let nb = budgets.len();
                let mut total = 0.0;
                for (b, &n) in budgets.iter().zip(&nu[..nb]) {
                    if n <= 0.0 {
                        return f64::INFINITY;
                    }
                    total += b * ((b / n).ln() - 1.0);
                }
                for &n in &nu[nb..] {
                    total += if n <= *eps_good {
                        n * n / (2.0 * eps_good)
                    } else {
                        n - 0.5 * eps_good
                    };
                }
                total
            }
            ObjectiveAtom::Custom(c) => c.ubar(nu),
        }
    }

    /// The `y` attaining `Ubar(nu)`. `nu` must lie in the domain of `Ubar`.
    pub fn ubar_maximizer(&self, nu: &[f64]) -> Result<Vec<f64>> {
        match self {
            ObjectiveAtom::Linear { c } => {
                if let Some(j) = (0..nu.len()).find(|&j| nu[j] < c[j]) {
                    return Err(Error::ConjugateBoundary { coordinate: j });
                }
                Ok(vec![0.0; nu.len()])
            }
            ObjectiveAtom::NonpositiveQuadratic { demand, kappa } => {
                if let Some(j) = (0..nu.len()).find(|&j| nu[j] < 0.0) {
                    return Err(Error::ConjugateBoundary { coordinate: j });
                }
                Ok((0..nu.len()).map(|j| demand[j] - nu[j] / kappa[j]).collect())
            }
            ObjectiveAtom::FisherBudget {
                budgets, eps_good, ..
            } => {
                let nb = budgets.len();
                let mut y = Vec::with_capacity(nu.len());
                for (j, (b, &n)) in budgets.iter().zip(&nu[..nb]).enumerate() {
                    if n <= 0.0 {
                        return Err(Error::ConjugateBoundary { coordinate: j });
                    }
                    y.push(b / n);
                }
                y.extend(nu[nb..].iter().map(|&n| (-n / eps_good).max(-1.0)));
                Ok(y)
            }
            ObjectiveAtom::Custom(c) => Ok(c.maximizer(nu)),
        }
    }

    /// `grad Ubar(nu) = -y*(nu)`.
    pub fn ubar_gradient(&self, nu: &[f64]) -> Result<Vec<f64>> {
        Ok(self.ubar_maximizer(nu)?.into_iter().map(|v| -v).collect())
    }

    /// A strictly interior, strictly positive starting price vector.
    pub fn initial_dual(&self) -> Result<Vec<f64>> {
        match self {
            ObjectiveAtom::Linear { c } => Ok(c.iter().map(|cj| cj + 1.0).collect()),
            ObjectiveAtom::NonpositiveQuadratic { demand, kappa } => Ok(demand
                .iter()
                .zip(kappa)
                .map(|(d, k)| (d * k / 2.0).max(1.0))
                .collect()),
            ObjectiveAtom::FisherBudget { .. } => Ok(vec![1.0; self.dim().unwrap_or(0)]),
            ObjectiveAtom::Custom(c) => {
                let nu0 = c.initial_dual();
                if nu0.len() != c.dim() {
                    return Err(Error::Config("custom start point has wrong length".into()));
                }
                if nu0.iter().any(|&v| !(v > 0.0 && v.is_finite())) || !c.ubar(&nu0).is_finite() {
                    return Err(Error::Config(
                        "custom start point outside the objective's dual domain".into(),
                    ));
                }
                Ok(nu0)
            }
        }
    }

    /// Componentwise lower boundary of `dom Ubar` that iterates must stay above.
    pub fn dual_lower_bound(&self) -> Vec<f64> {
        match self {
            ObjectiveAtom::Linear { c } => c.clone(),
            ObjectiveAtom::Custom(c) => c.dual_lower_bound(),
            _ => vec![0.0; self.dim().unwrap_or(0)],
        }
    }

    /// Nearest point of the polyhedral part of `dom U`.
    pub fn project_domain(&self, y: &[f64]) -> Vec<f64> {
        match self {
            ObjectiveAtom::Linear { .. } => y.iter().map(|v| v.max(0.0)).collect(),
            ObjectiveAtom::NonpositiveQuadratic { .. } => y.to_vec(),
            ObjectiveAtom::FisherBudget { budgets, .. } => y
                .iter()
                .enumerate()
                .map(|(j, &v)| if j < budgets.len() { v } else { v.max(-1.0) })
                .collect(),
            ObjectiveAtom::Custom(c) => c.project_domain(y),
        }
    }

    /// Primal value certified against prices `nu`.
    ///
    /// Equals `U(y)` when `y` is in the domain. Otherwise `y` is projected to
    /// `p` and the correction is bought back at prices `nu`, giving
    /// `U(p) - nu^T (p - y)`, which never exceeds the dual value at `nu`.
    /// Returns `-inf` when the correction exceeds `tol * max(1, |y|_inf)`.
    pub fn certified_value(&self, y: &[f64], nu: &[f64], tol: f64) -> f64 {
        let direct = self.u_eval(y);
        if direct.is_finite() {
            return direct;
        }
        let p = self.project_domain(y);
        let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let gap = p
            .iter()
            .zip(y)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if gap > tol * scale {
            return f64::NEG_INFINITY;
        }
        let correction: f64 = nu.iter().zip(p.iter().zip(y)).map(|(n, (a, b))| n * (a - b)).sum();
        self.u_eval(&p) - correction
    }
}

#[derive(Debug, Clone, Default)]
pub enum EdgeObjectiveAtom {
    #[default]
    Zero,
    /// `V(x) = -(1/2) |min(x, 0)|^2`.
    NegPartQuadratic,
    Custom(Arc<dyn CustomEdgeObjective>),
}

impl EdgeObjectiveAtom {
    pub fn is_zero(&self) -> bool {
        matches!(self, EdgeObjectiveAtom::Zero)
    }

    pub fn v_eval(&self, x: &[f64]) -> f64 {
        match self {
            EdgeObjectiveAtom::Zero => 0.0,
            EdgeObjectiveAtom::NegPartQuadratic => {
                -0.5 * x.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>()
            }
            EdgeObjectiveAtom::Custom(c) => c.v(x),
        }
    }

    /// `Vbar(xi) = sup_x V(x) - xi^T x`.
    pub fn vbar(&self, xi: &[f64]) -> f64 {
        match self {
            EdgeObjectiveAtom::Zero => {
                if xi.iter().all(|&v| v == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            EdgeObjectiveAtom::NegPartQuadratic => {
                if xi.iter().any(|&v| v < 0.0) {
                    f64::INFINITY
                } else {
                    0.5 * xi.iter().map(|v| v * v).sum::<f64>()
                }
            }
            EdgeObjectiveAtom::Custom(c) => c.vbar(xi),
        }
    }

    pub fn vbar_maximizer(&self, xi: &[f64]) -> Vec<f64> {
        match self {
            EdgeObjectiveAtom::Zero => vec![0.0; xi.len()],
            EdgeObjectiveAtom::NegPartQuadratic => xi.iter().map(|v| -v).collect(),
            EdgeObjectiveAtom::Custom(c) => c.maximizer(xi),
        }
    }

    /// `grad V(x)`, the edge price offset `xi` that supports `x`.
    pub fn v_gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            EdgeObjectiveAtom::Zero => vec![0.0; x.len()],
            EdgeObjectiveAtom::NegPartQuadratic => x.iter().map(|v| (-v).max(0.0)).collect(),
            EdgeObjectiveAtom::Custom(c) => c.gradient(x),
        }
    }
}
