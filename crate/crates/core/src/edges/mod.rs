//! Edges and their arbitrage subproblems `f(eta) = sup_{x in T} eta^T x`.

mod gain;
mod hyper;

pub use gain::{homogeneity_normalize, Arbitrage, Gain, GainEdge, GainFunction};
pub use hyper::{HyperEdge, HyperKind, SupportOracle};

use crate::error::Result;
use crate::model::IncidenceMap;

#[derive(Debug, Clone)]
pub enum Edge {
    Gain(GainEdge),
    Hyper(HyperEdge),
}

impl Edge {
    pub fn map(&self) -> &IncidenceMap {
        match self {
            Edge::Gain(e) => e.map(),
            Edge::Hyper(e) => e.map(),
        }
    }

    /// Support value and an attaining flow at local prices `eta`.
    pub fn support(&self, eta: &[f64], tol: f64) -> Result<(f64, Vec<f64>)> {
        match self {
            Edge::Gain(e) => {
                let out = e.arbitrage([eta[0], eta[1]], tol)?;
                Ok((out.value, out.flow.to_vec()))
            }
            Edge::Hyper(e) => e.support(eta),
        }
    }
}

impl From<GainEdge> for Edge {
    fn from(e: GainEdge) -> Self {
        Edge::Gain(e)
    }
}

impl From<HyperEdge> for Edge {
    fn from(e: HyperEdge) -> Self {
        Edge::Hyper(e)
    }
}
