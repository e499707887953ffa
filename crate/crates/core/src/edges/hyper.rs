use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::IncidenceMap;

/// Support oracle `eta -> (sup_{x in T} eta^T x, argmax)` for a general allowable set.
pub trait SupportOracle: Send + Sync + fmt::Debug {
    fn support(&self, eta: &[f64]) -> (f64, Vec<f64>);
}

#[derive(Debug, Clone)]
pub enum HyperKind {
    /// Box `lower <= x <= upper` with `lower <= 0 <= upper`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Custom(Arc<dyn SupportOracle>),
}

#[derive(Debug, Clone)]
pub struct HyperEdge {
    map: IncidenceMap,
    kind: HyperKind,
}

impl HyperEdge {
    pub fn new(map: IncidenceMap, kind: HyperKind) -> Result<Self> {
        if let HyperKind::Box { lower, upper } = &kind {
            for (what, v) in [("box lower", lower), ("box upper", upper)] {
                if v.len() != map.len() {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected: map.len(),
                        actual: v.len(),
                    });
                }
            }
            let ok = lower
                .iter()
                .zip(upper)
                .all(|(&l, &u)| l.is_finite() && u.is_finite() && l <= 0.0 && u >= 0.0);
            if !ok {
                return Err(Error::Config(
                    "box bounds must be finite with lower <= 0 <= upper".into(),
                ));
            }
        }
        Ok(HyperEdge { map, kind })
    }

    pub fn boxed(map: IncidenceMap, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(map, HyperKind::Box { lower, upper })
    }

    pub fn map(&self) -> &IncidenceMap {
        &self.map
    }

    pub fn kind(&self) -> &HyperKind {
        &self.kind
    }

    pub fn support(&self, eta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if eta.len() != self.map.len() {
            return Err(Error::DimensionMismatch {
                what: "edge prices",
                expected: self.map.len(),
                actual: eta.len(),
            });
        }
        match &self.kind {
            HyperKind::Box { lower, upper } => {
                let mut value = 0.0;
                let x: Vec<f64> = (0..eta.len())
                    .map(|k| {
                        let xk = if eta[k] > 0.0 {
                            upper[k]
                        } else if eta[k] < 0.0 {
                            lower[k]
                        } else {
                            0.0
                        };
                        value += eta[k] * xk;
                        xk
                    })
                    .collect();
                Ok((value, x))
            }
            HyperKind::Custom(oracle) => {
                let (value, x) = oracle.support(eta);
                if value == f64::INFINITY || x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::UnboundedEdge);
                }
                if x.len() != eta.len() {
                    return Err(Error::DimensionMismatch {
                        what: "support maximizer",
                        expected: eta.len(),
                        actual: x.len(),
                    });
                }
                Ok((value, x))
            }
        }
    }
}
