//! Seeded instance generators for power flow, exchange routing and Fisher markets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::edges::{Edge, Gain, GainEdge};
use crate::error::{Error, Result};
use crate::model::{IncidenceMap, Problem};
use crate::objectives::{EdgeObjectiveAtom, ObjectiveAtom, DEFAULT_EPS_GOOD};

pub const LINE_ALPHA: f64 = 16.0;
pub const LINE_BETA: f64 = 0.25;
pub const STORAGE_EPS: f64 = 1e-2;
pub const STORAGE_CAPACITY: f64 = 10.0;
pub const DEFAULT_FEE: f64 = 0.997;

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn line(from: usize, to: usize, capacity: f64) -> Result<Edge> {
    Ok(Edge::Gain(GainEdge::new(
        IncidenceMap::pair(from, to),
        Gain::PowerLine {
            alpha: LINE_ALPHA,
            beta: LINE_BETA,
        },
        capacity,
    )?))
}

fn storage(from: usize, to: usize, gamma: f64) -> Result<Edge> {
    Ok(Edge::Gain(GainEdge::new(
        IncidenceMap::pair(from, to),
        Gain::Storage {
            gamma,
            eps: STORAGE_EPS,
        },
        STORAGE_CAPACITY,
    )?))
}

/// Undirected transmission lines: a Euclidean minimum spanning tree over
/// random points in the unit square plus `ceil(0.05 n)` random long lines.
pub fn grid_topology(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    let dist = |a: usize, b: usize| (pts[a].0 - pts[b].0).hypot(pts[a].1 - pts[b].1);

    // Prim's algorithm, O(n^2).
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    let mut lines = Vec::with_capacity(n);
    in_tree[0] = true;
    for j in 1..n {
        best[j] = (dist(0, j), 0);
    }
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))
            .expect("nodes remain outside the tree");
        in_tree[next] = true;
        let parent = best[next].1;
        lines.push((parent.min(next), parent.max(next)));
        for j in 0..n {
            if !in_tree[j] && dist(next, j) < best[j].0 {
                best[j] = (dist(next, j), next);
            }
        }
    }

    let max_lines = n * (n - 1) / 2;
    let extra = ((0.05 * n as f64).ceil() as usize).min(max_lines - lines.len());
    let mut added = 0;
    while added < extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let key = (a.min(b), a.max(b));
        if a != b && !lines.contains(&key) {
            lines.push(key);
            added += 1;
        }
    }
    lines
}

/// Power network over `periods` time slices with `n` nodes each; node `j` at
/// slice `t` has index `j + t n`.
pub fn generate_opf(n: usize, periods: usize, seed: u64) -> Result<Problem> {
    if n < 2 || periods < 1 {
        return Err(Error::Config("opf needs n >= 2 and periods >= 1".into()));
    }
    let mut rng = rng(seed);
    let topology = grid_topology(n, &mut rng);
    let capacities: Vec<f64> = topology
        .iter()
        .map(|_| *[1.0, 2.0, 3.0].choose(&mut rng).expect("nonempty"))
        .collect();

    let mut edges = Vec::new();
    for t in 0..periods {
        let at = |j: usize| j + t * n;
        for (&(a, b), &cap) in topology.iter().zip(&capacities) {
            edges.push(line(at(a), at(b), cap)?);
            edges.push(line(at(b), at(a), cap)?);
        }
    }
    if periods > 1 {
        for j in 0..n {
            if rng.gen_bool(0.5) {
                let gamma = rng.gen_range(0.5..=1.0);
                for t in 0..periods - 1 {
                    edges.push(storage(j + t * n, j + (t + 1) * n, gamma)?);
                }
            }
        }
    }
    let demand: Vec<f64> = (0..n * periods)
        .map(|_| {
            if periods == 1 {
                *[0.5, 1.0, 2.0].choose(&mut rng).expect("nonempty")
            } else {
                rng.gen_range(1.0..=5.0)
            }
        })
        .collect();
    let objective = ObjectiveAtom::nonpositive_quadratic(demand, vec![1.0; n * periods])?;
    Problem::new(n * periods, edges, objective, None)
}

pub const PRESET_USER_COST: f64 = 100.0;
pub const PRESET_GENERATOR_COST: f64 = 1.0;
pub const PRESET_LINE_CAPACITY: f64 = 4.0;

/// Two users (nodes 0 and 1) fed by one generator (node 2) over `periods`
/// hourly slices with a daily sinusoidal demand. With `battery`, user 1 can
/// carry energy to the next slice.
pub fn three_node_preset(periods: usize, battery: bool) -> Result<Problem> {
    if periods < 1 {
        return Err(Error::Config("preset needs periods >= 1".into()));
    }
    let n = 3;
    let mut edges = Vec::new();
    for t in 0..periods {
        for user in 0..2 {
            edges.push(line(2 + t * n, user + t * n, PRESET_LINE_CAPACITY)?);
        }
    }
    if battery {
        for t in 0..periods - 1 {
            edges.push(storage(1 + t * n, 1 + (t + 1) * n, 1.0)?);
        }
    }
    let mut demand = Vec::with_capacity(n * periods);
    let mut kappa = Vec::with_capacity(n * periods);
    for t in 1..=periods {
        let d = (t as f64 * 2.0 * std::f64::consts::PI / 24.0).sin() + 1.5;
        demand.extend([d, d, 0.0]);
        kappa.extend([PRESET_USER_COST, PRESET_USER_COST, PRESET_GENERATOR_COST]);
    }
    let objective = ObjectiveAtom::nonpositive_quadratic(demand, kappa)?;
    Problem::new(n * periods, edges, objective, None)
}

/// `ub` of an exchange edge as a multiple of the tendered reserve.
pub const CFMM_UB_FACTOR: f64 = 100.0;

/// `m` two-asset pools over `ceil(2 sqrt(m))` assets, each pool emitting one
/// edge per trade direction. Objective: total holdings at unit prices.
pub fn generate_cfmm(m: usize, seed: u64, penalties: bool) -> Result<Problem> {
    if m < 1 {
        return Err(Error::Config("cfmm needs m >= 1".into()));
    }
    let n = ((2.0 * (m as f64).sqrt()).ceil() as usize).max(2);
    let mut rng = rng(seed);
    let mut edges = Vec::with_capacity(2 * m);
    for _ in 0..m {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n)) % n;
        let ra = rng.gen_range(100.0..=200.0);
        let rb = rng.gen_range(100.0..=200.0);
        let (forward, backward) = if rng.gen_bool(0.5) {
            (
                Gain::Uniswap { r1: ra, r2: rb, fee: DEFAULT_FEE },
                Gain::Uniswap { r1: rb, r2: ra, fee: DEFAULT_FEE },
            )
        } else {
            (
                Gain::BalancerTwo { r1: ra, r2: rb, weight: 0.8, fee: DEFAULT_FEE },
                Gain::BalancerTwo { r1: rb, r2: ra, weight: 0.2, fee: DEFAULT_FEE },
            )
        };
        edges.push(Edge::Gain(GainEdge::new(IncidenceMap::pair(a, b), forward, CFMM_UB_FACTOR * ra)?));
        edges.push(Edge::Gain(GainEdge::new(IncidenceMap::pair(b, a), backward, CFMM_UB_FACTOR * rb)?));
    }
    let edge_objectives = penalties.then(|| vec![EdgeObjectiveAtom::NegPartQuadratic; edges.len()]);
    Problem::new(n, edges, ObjectiveAtom::linear(vec![1.0; n])?, edge_objectives)
}

/// Fisher market with buyers `0..n_b` and goods `n_b..n_b + n_g`. Buyer `b`
/// values good `g` through `sqrt(b + g x) - sqrt(b)` (1-based indices).
pub fn generate_fisher(n_buyers: usize, n_goods: usize, seed: u64) -> Result<Problem> {
    if n_buyers < 1 || n_goods < 1 {
        return Err(Error::Config("fisher needs at least one buyer and one good".into()));
    }
    let mut rng = rng(seed);
    let budgets: Vec<f64> = (0..n_buyers).map(|_| rng.gen_range(1.0..=2.0)).collect();
    let mut edges = Vec::with_capacity(n_buyers * n_goods);
    for g in 0..n_goods {
        for b in 0..n_buyers {
            let gain = Gain::Sqrt {
                b: (b + 1) as f64,
                g: (g + 1) as f64,
            };
            edges.push(Edge::Gain(GainEdge::new(IncidenceMap::pair(n_buyers + g, b), gain, 1.0)?));
        }
    }
    let objective = ObjectiveAtom::fisher(budgets, n_goods, DEFAULT_EPS_GOOD)?;
    Problem::new(n_buyers + n_goods, edges, objective, None)
}
