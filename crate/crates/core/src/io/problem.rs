//! Problem files: a strict JSON schema with path-qualified errors.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::edges::{Edge, Gain, GainEdge, HyperEdge, HyperKind};
use crate::error::{Error, Result};
use crate::model::{IncidenceMap, Problem};
use crate::objectives::{EdgeObjectiveAtom, ObjectiveAtom, DEFAULT_EPS_GOOD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Linear {
        c: Vec<f64>,
    },
    NonpositiveQuadratic {
        d: Vec<f64>,
        kappa: Vec<f64>,
    },
    Fisher {
        budgets: Vec<f64>,
        goods: usize,
        #[serde(default = "default_eps_good")]
        eps_good: f64,
    },
}

fn default_eps_good() -> f64 {
    DEFAULT_EPS_GOOD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EdgeSpec {
    Powerline {
        nodes: Vec<usize>,
        alpha: f64,
        beta: f64,
        ub: f64,
    },
    Storage {
        nodes: Vec<usize>,
        gamma: f64,
        eps: f64,
        ub: f64,
    },
    Lossless {
        nodes: Vec<usize>,
        eps: f64,
        ub: f64,
    },
    Uniswap {
        nodes: Vec<usize>,
        #[serde(rename = "R")]
        reserves: [f64; 2],
        fee: f64,
        ub: f64,
    },
    #[serde(rename = "balancer2")]
    Balancer2 {
        nodes: Vec<usize>,
        #[serde(rename = "R")]
        reserves: [f64; 2],
        weight: f64,
        fee: f64,
        ub: f64,
    },
    Sqrt {
        nodes: Vec<usize>,
        b: f64,
        g: f64,
        ub: f64,
    },
    Box {
        nodes: Vec<usize>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EdgeObjectiveSpec {
    Zero,
    NegpartQuadratic,
}

/// The on-disk document, in canonical key order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub nodes: usize,
    pub objective: ObjectiveSpec,
    pub edges: Vec<EdgeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_objectives: Option<Vec<EdgeObjectiveSpec>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    comment: Option<String>,
    nodes: usize,
    objective: Value,
    edges: Vec<Value>,
    #[serde(default)]
    edge_objectives: Option<Vec<Value>>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn join(prefix: &str, inner: &str) -> String {
    // serde_path_to_error renders the root as "." and an unknown position as "?".
    if inner.is_empty() || inner == "." || inner == "?" {
        prefix.to_string()
    } else if prefix.is_empty() {
        inner.to_string()
    } else if inner.starts_with('[') {
        format!("{prefix}{inner}")
    } else {
        format!("{prefix}.{inner}")
    }
}

fn path_error<E: std::fmt::Display>(prefix: &str, err: serde_path_to_error::Error<E>) -> Error {
    let mut path = join(prefix, &err.path().to_string());
    let message = err.inner().to_string();
    if let Some(field) = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next())
    {
        path = join(&path, field);
    }
    schema(path, message)
}

/// Deserializes one internally tagged object, keeping the full path on errors.
fn tagged<T: DeserializeOwned>(value: &Value, path: &str, variants: &[&str]) -> Result<T> {
    let obj = value
        .as_object()
        .ok_or_else(|| schema(path, "expected an object"))?;
    let tag = obj
        .get("type")
        .ok_or_else(|| schema(join(path, "type"), "missing field `type`"))?
        .as_str()
        .ok_or_else(|| schema(join(path, "type"), "expected a string"))?;
    if !variants.contains(&tag) {
        return Err(schema(
            join(path, "type"),
            format!("unknown type {tag:?}, expected one of {variants:?}"),
        ));
    }
    // Check the remaining fields against the variant on its own, so that
    // errors carry the field path.
    let mut body: Map<String, Value> = obj.clone();
    body.remove("type");
    let probe = Value::Object(body);
    check_variant(tag, &probe).map_err(|e| match e {
        Error::Schema { path: inner, message } => schema(join(path, &inner), message),
        other => other,
    })?;
    serde_json::from_value(value.clone()).map_err(|e| schema(path, e.to_string()))
}

/// Declares one strict struct per variant and deserializes `$value` into the
/// one named by `$tag`, reporting field paths relative to the object.
macro_rules! variant_checks {
    ($tag:expr, $value:expr, {
        $($name:literal => $ty:ident { $($(#[$attr:meta])* $field:ident : $fty:ty),* $(,)? }),* $(,)?
    }) => {{
        $(
            #[allow(dead_code)]
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct $ty { $($(#[$attr])* $field: $fty),* }
        )*
        match $tag {
            $($name => serde_path_to_error::deserialize::<_, $ty>($value)
                .map(|_| ())
                .map_err(|e| path_error("", e)),)*
            _ => Ok(()),
        }
    }};
}

fn check_variant(tag: &str, value: &Value) -> Result<()> {
    variant_checks!(tag, value, {
        "linear" => Linear { c: Vec<f64> },
        "nonpositive_quadratic" => Quadratic { d: Vec<f64>, kappa: Vec<f64> },
        "fisher" => Fisher { budgets: Vec<f64>, goods: usize, #[serde(default)] eps_good: Option<f64> },
        "powerline" => Powerline { nodes: Vec<usize>, alpha: f64, beta: f64, ub: f64 },
        "storage" => Storage { nodes: Vec<usize>, gamma: f64, eps: f64, ub: f64 },
        "lossless" => Lossless { nodes: Vec<usize>, eps: f64, ub: f64 },
        "uniswap" => Uniswap { nodes: Vec<usize>, #[serde(rename = "R")] reserves: [f64; 2], fee: f64, ub: f64 },
        "balancer2" => Balancer2 {
            nodes: Vec<usize>,
            #[serde(rename = "R")] reserves: [f64; 2],
            weight: f64,
            fee: f64,
            ub: f64,
        },
        "sqrt" => Sqrt { nodes: Vec<usize>, b: f64, g: f64, ub: f64 },
        "box" => BoxEdge { nodes: Vec<usize>, lower: Vec<f64>, upper: Vec<f64> },
        "zero" => Zero {},
        "negpart_quadratic" => NegPart {},
    })
}

const OBJECTIVE_TYPES: &[&str] = &["linear", "nonpositive_quadratic", "fisher"];
const EDGE_TYPES: &[&str] = &["powerline", "storage", "lossless", "uniswap", "balancer2", "sqrt", "box"];
const EDGE_OBJECTIVE_TYPES: &[&str] = &["zero", "negpart_quadratic"];

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawFile = serde_path_to_error::deserialize(de).map_err(|e| path_error("", e))?;
        let objective = tagged(&raw.objective, "objective", OBJECTIVE_TYPES)?;
        let edges = raw
            .edges
            .iter()
            .enumerate()
            .map(|(i, v)| tagged(v, &format!("edges[{i}]"), EDGE_TYPES))
            .collect::<Result<_>>()?;
        let edge_objectives = raw
            .edge_objectives
            .map(|list| {
                list.iter()
                    .enumerate()
                    .map(|(i, v)| tagged(v, &format!("edge_objectives[{i}]"), EDGE_OBJECTIVE_TYPES))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Ok(ProblemFile {
            comment: raw.comment,
            nodes: raw.nodes,
            objective,
            edges,
            edge_objectives,
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("problem files always serialize");
        text.push('\n');
        text
    }

    /// Builds and validates the in-memory problem.
    pub fn to_problem(&self) -> Result<Problem> {
        let objective = match &self.objective {
            ObjectiveSpec::Linear { c } => ObjectiveAtom::linear(c.clone()),
            ObjectiveSpec::NonpositiveQuadratic { d, kappa } => {
                ObjectiveAtom::nonpositive_quadratic(d.clone(), kappa.clone())
            }
            ObjectiveSpec::Fisher {
                budgets,
                goods,
                eps_good,
            } => ObjectiveAtom::fisher(budgets.clone(), *goods, *eps_good),
        }
        .map_err(|e| schema("objective", e.to_string()))?;
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, spec)| build_edge(spec).map_err(|e| schema(format!("edges[{i}]"), e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let edge_objectives = self.edge_objectives.as_ref().map(|list| {
            list.iter()
                .map(|spec| match spec {
                    EdgeObjectiveSpec::Zero => EdgeObjectiveAtom::Zero,
                    EdgeObjectiveSpec::NegpartQuadratic => EdgeObjectiveAtom::NegPartQuadratic,
                })
                .collect()
        });
        Problem::new(self.nodes, edges, objective, edge_objectives)
    }

    /// Describes `problem` in file form. Custom callbacks have no file form.
    pub fn from_problem(problem: &Problem, comment: Option<String>) -> Result<Self> {
        let objective = match problem.objective() {
            ObjectiveAtom::Linear { c } => ObjectiveSpec::Linear { c: c.clone() },
            ObjectiveAtom::NonpositiveQuadratic { demand, kappa } => ObjectiveSpec::NonpositiveQuadratic {
                d: demand.clone(),
                kappa: kappa.clone(),
            },
            ObjectiveAtom::FisherBudget {
                budgets,
                num_goods,
                eps_good,
            } => ObjectiveSpec::Fisher {
                budgets: budgets.clone(),
                goods: *num_goods,
                eps_good: *eps_good,
            },
            ObjectiveAtom::Custom(_) => return Err(Error::Config("custom objectives cannot be serialized".into())),
        };
        let edges = problem.edges().iter().map(edge_spec).collect::<Result<_>>()?;
        let edge_objectives = problem
            .edge_objectives()
            .map(|list| {
                list.iter()
                    .map(|atom| match atom {
                        EdgeObjectiveAtom::Zero => Ok(EdgeObjectiveSpec::Zero),
                        EdgeObjectiveAtom::NegPartQuadratic => Ok(EdgeObjectiveSpec::NegpartQuadratic),
                        EdgeObjectiveAtom::Custom(_) => {
                            Err(Error::Config("custom edge objectives cannot be serialized".into()))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Ok(ProblemFile {
            comment,
            nodes: problem.num_nodes(),
            objective,
            edges,
            edge_objectives,
        })
    }
}

fn build_edge(spec: &EdgeSpec) -> Result<Edge> {
    let gain = |nodes: &[usize], gain: Gain, ub: f64| -> Result<Edge> {
        Ok(Edge::Gain(GainEdge::new(IncidenceMap::new(nodes.iter().copied()), gain, ub)?))
    };
    match spec {
        EdgeSpec::Powerline { nodes, alpha, beta, ub } => gain(nodes, Gain::PowerLine { alpha: *alpha, beta: *beta }, *ub),
        EdgeSpec::Storage { nodes, gamma, eps, ub } => gain(nodes, Gain::Storage { gamma: *gamma, eps: *eps }, *ub),
        EdgeSpec::Lossless { nodes, eps, ub } => gain(nodes, Gain::Lossless { eps: *eps }, *ub),
        EdgeSpec::Uniswap { nodes, reserves, fee, ub } => gain(
            nodes,
            Gain::Uniswap { r1: reserves[0], r2: reserves[1], fee: *fee },
            *ub,
        ),
        EdgeSpec::Balancer2 { nodes, reserves, weight, fee, ub } => gain(
            nodes,
            Gain::BalancerTwo { r1: reserves[0], r2: reserves[1], weight: *weight, fee: *fee },
            *ub,
        ),
        EdgeSpec::Sqrt { nodes, b, g, ub } => gain(nodes, Gain::Sqrt { b: *b, g: *g }, *ub),
        EdgeSpec::Box { nodes, lower, upper } => Ok(Edge::Hyper(HyperEdge::boxed(
            IncidenceMap::new(nodes.iter().copied()),
            lower.clone(),
            upper.clone(),
        )?)),
    }
}

fn edge_spec(edge: &Edge) -> Result<EdgeSpec> {
    let nodes: Vec<usize> = edge.map().nodes().iter().map(|n| n.get()).collect();
    Ok(match edge {
        Edge::Gain(g) => {
            let ub = g.ub();
            match *g.gain() {
                Gain::PowerLine { alpha, beta } => EdgeSpec::Powerline { nodes, alpha, beta, ub },
                Gain::Storage { gamma, eps } => EdgeSpec::Storage { nodes, gamma, eps, ub },
                Gain::Lossless { eps } => EdgeSpec::Lossless { nodes, eps, ub },
                Gain::Uniswap { r1, r2, fee } => EdgeSpec::Uniswap { nodes, reserves: [r1, r2], fee, ub },
                Gain::BalancerTwo { r1, r2, weight, fee } => EdgeSpec::Balancer2 {
                    nodes,
                    reserves: [r1, r2],
                    weight,
                    fee,
                    ub,
                },
                Gain::Sqrt { b, g } => EdgeSpec::Sqrt { nodes, b, g, ub },
                Gain::Custom(_) => return Err(Error::Config("custom gains cannot be serialized".into())),
            }
        }
        Edge::Hyper(h) => match h.kind() {
            HyperKind::Box { lower, upper } => EdgeSpec::Box {
                nodes,
                lower: lower.clone(),
                upper: upper.clone(),
            },
            HyperKind::Custom(_) => return Err(Error::Config("custom hyperedges cannot be serialized".into())),
        },
    })
}

/// Parses and validates a problem document.
pub fn parse_problem_str(text: &str) -> Result<Problem> {
    ProblemFile::from_json(text)?.to_problem()
}

pub fn parse_problem(path: &std::path::Path) -> Result<Problem> {
    parse_problem_str(&std::fs::read_to_string(path)?)
}

pub fn problem_to_json(problem: &Problem, comment: Option<String>) -> Result<String> {
    Ok(ProblemFile::from_problem(problem, comment)?.to_json())
}
