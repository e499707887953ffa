//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use convexflows::diagnostics::{check_optimality, finite_diff_grad, grid_oracle};
use convexflows::generate::{generate_cfmm, generate_fisher, generate_opf, three_node_preset};
use convexflows::io::problem_to_json;
use convexflows::solver::{solve_extended, solve_reduced, DualOracle, Layout, TraceRow};
use convexflows::{
    solve, Edge, Gain, GainEdge, IncidenceMap, ObjectiveAtom, Problem, SolveResult, SolverConfig, Status,
};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

// Criterion 1
const FD_STEP: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-5;
const FD_INSTANCES: usize = 20;
const FD_POINTS: usize = 20;
const FD_BUDGET: Duration = Duration::from_secs(10);
// Criterion 2
const CLOSED_FORM_TOL: f64 = 1e-7;
const CLOSED_FORM_SAMPLES: usize = 1000;
const CLOSED_FORM_BUDGET: Duration = Duration::from_secs(5);
// Criterion 3
const GRID_INSTANCES: usize = 50;
const GRID_RESOLUTION: f64 = 1e-3;
const GRID_ABS_TOL: f64 = 1e-3;
const GRID_BUDGET: Duration = Duration::from_secs(60);
// Criterion 4
const WEAK_DUALITY_RTOL: f64 = 1e-9;
// Criterion 5
const OPF_GAP: f64 = 1e-8;
const OPF_RESIDUAL: f64 = 1e-6;
const OPF_MAX_ITERS: usize = 500;
const OPF_BUDGET: Duration = Duration::from_secs(10);
// Criterion 6
const CFMM_GAP: f64 = 1e-6;
const CFMM_MIN_Y: f64 = -1e-6;
const CFMM_PENALTY_GAP: f64 = 1e-5;
const CFMM_PENALTY_KKT: f64 = 1e-4;
const CFMM_BUDGET: Duration = Duration::from_secs(30);
// Criterion 7
const BATTERY_MIN_IMPROVEMENT: f64 = 0.01;
const BATTERY_BUDGET: Duration = Duration::from_secs(5);
// Criterion 8
const NO_FLOW_SAMPLES: usize = 10_000;
const NO_FLOW_TOL: f64 = 1e-9;
// Criterion 10
const FISHER_KKT: f64 = 1e-5;
const FISHER_BUDGET: Duration = Duration::from_secs(5);

const SEEDS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Every solver trace produced by the suite, for the weak-duality check.
#[derive(Default)]
struct Traces(Vec<(String, Vec<TraceRow>)>);

impl Traces {
    fn keep(&mut self, label: impl Into<String>, result: &SolveResult) {
        self.0.push((label.into(), result.trace.clone()));
    }
}

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn random_gain(rng: &mut impl Rng, families: &[&str]) -> (Gain, f64) {
    match families[rng.gen_range(0..families.len())] {
        "powerline" => {
            // The gain peaks at w = ln(3) / beta.
            let alpha = rng.gen_range(4.0..32.0);
            let beta = 4.0 / alpha;
            (Gain::PowerLine { alpha, beta }, rng.gen_range(0.2..1.0) * 3f64.ln() / beta)
        }
        "storage" => (Gain::Storage { gamma: rng.gen_range(0.5..1.0), eps: 1e-2 }, rng.gen_range(1.0..10.0)),
        "lossless" => (Gain::Lossless { eps: rng.gen_range(1e-3..1e-1) }, rng.gen_range(1.0..5.0)),
        "uniswap" => {
            let (r1, r2) = (rng.gen_range(2.0..10.0), rng.gen_range(2.0..10.0));
            (Gain::Uniswap { r1, r2, fee: 0.997 }, rng.gen_range(1.0..5.0) * r1)
        }
        "balancer" => {
            let (r1, r2) = (rng.gen_range(2.0..10.0), rng.gen_range(2.0..10.0));
            let weight = rng.gen_range(0.2..0.8);
            (Gain::BalancerTwo { r1, r2, weight, fee: 0.997 }, rng.gen_range(1.0..5.0) * r1)
        }
        other => unreachable!("{other}"),
    }
}

fn random_edges(rng: &mut impl Rng, n: usize, m: usize, families: &[&str]) -> Vec<Edge> {
    (0..m)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            let (gain, ub) = random_gain(rng, families);
            Edge::Gain(GainEdge::new(IncidenceMap::pair(a, b), gain, ub).unwrap())
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn gradient_correctness() -> Outcome {
    const FAMILIES: &[&str] = &["powerline", "storage", "uniswap", "balancer"];
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for k in 0..FD_INSTANCES {
        let mut rng = rng(1000 + k as u64);
        let n = rng.gen_range(2..=10);
        let m = rng.gen_range(1..=20);
        let edges = random_edges(&mut rng, n, m, FAMILIES);
        // Cycle through the objective atoms; the sampler keeps points strictly
        // inside each atom's dual domain.
        let (objective, sample): (ObjectiveAtom, Box<dyn Fn(&mut Xoshiro256PlusPlus) -> Vec<f64>>) = match k % 3 {
            0 => {
                let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
                let lo = c.clone();
                (
                    ObjectiveAtom::linear(c).unwrap(),
                    Box::new(move |r| lo.iter().map(|cj| cj + r.gen_range(0.1..2.0)).collect()),
                )
            }
            1 => {
                let d = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
                let kappa = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
                (
                    ObjectiveAtom::nonpositive_quadratic(d, kappa).unwrap(),
                    Box::new(move |r| (0..n).map(|_| r.gen_range(0.1..3.0)).collect()),
                )
            }
            _ => {
                let nb = rng.gen_range(1..n);
                let budgets = (0..nb).map(|_| rng.gen_range(1.0..2.0)).collect();
                (
                    ObjectiveAtom::fisher(budgets, n - nb, 1e-8).unwrap(),
                    Box::new(move |r| (0..n).map(|_| r.gen_range(0.1..3.0)).collect()),
                )
            }
        };
        let problem = Problem::new(n, edges, objective, None).unwrap();
        let oracle = DualOracle::new(&problem, Layout::reduced(&problem), 1e-12, 1).unwrap();
        for _ in 0..FD_POINTS {
            let nu = sample(&mut rng);
            let analytic = oracle.eval(&nu).unwrap().grad;
            let numeric = finite_diff_grad(|z| oracle.value(z).unwrap(), &nu, FD_STEP).unwrap();
            let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
            worst = worst.max(inf_norm(&diff) / inf_norm(&analytic).max(1.0));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= FD_REL_TOL && elapsed < FD_BUDGET,
        format!("worst relative error {worst:.2e} (tol {FD_REL_TOL:.0e}), {elapsed:.2?}"),
    )
}

fn closed_form_vs_bisection() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut clamped = 0usize;
    for (f, family) in ["powerline", "storage", "lossless", "uniswap"].iter().enumerate() {
        let mut rng = rng(2000 + f as u64);
        for _ in 0..CLOSED_FORM_SAMPLES {
            let (gain, ub) = random_gain(&mut rng, &[family]);
            let edge = GainEdge::new(IncidenceMap::pair(0, 1), gain, ub).unwrap();
            // Log-uniform ratios over six decades reach both clamp regions.
            let ratio = 10f64.powf(rng.gen_range(-3.0..3.0));
            let closed = edge.closed_form_wstar(ratio).expect("family has a closed form");
            let bisected = edge.bisect_wstar(ratio, 1e-12).unwrap();
            if closed == 0.0 || closed == ub {
                clamped += 1;
            }
            worst = worst.max((closed - bisected).abs() / ub.max(1.0));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= CLOSED_FORM_TOL && clamped > 0 && elapsed < CLOSED_FORM_BUDGET,
        format!("worst scaled disagreement {worst:.2e}, {clamped} clamped samples, {elapsed:.2?}"),
    )
}

fn grid_equivalence(traces: &mut Traces) -> Outcome {
    const FAMILIES: &[&str] = &["powerline", "storage", "lossless", "uniswap", "balancer"];
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for k in 0..GRID_INSTANCES {
        let mut rng = rng(3000 + k as u64);
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(1..=3);
        let edges = random_edges(&mut rng, n, m, FAMILIES);
        let d = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let kappa = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let problem =
            Problem::new(n, edges, ObjectiveAtom::nonpositive_quadratic(d, kappa).unwrap(), None).unwrap();
        let result = solve(&problem, &SolverConfig::default()).unwrap();
        traces.keep(format!("grid instance {k}"), &result);
        if result.status != Status::Optimal {
            failures += 1;
        }
        let solver_value = problem.objective().u_eval(&result.y_hat);
        let grid = grid_oracle(&problem, GRID_RESOLUTION).unwrap();
        worst = worst.max((solver_value - grid.value).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= GRID_ABS_TOL && failures == 0 && elapsed < GRID_BUDGET,
        format!("worst |U - grid| {worst:.2e}, {failures} non-optimal runs, {elapsed:.2?}"),
    )
}

fn weak_duality(traces: &Traces) -> Outcome {
    let mut rows = 0usize;
    let mut violations = Vec::new();
    for (label, trace) in &traces.0 {
        for row in trace {
            rows += 1;
            if !(row.g >= row.primal_value - WEAK_DUALITY_RTOL * row.g.abs().max(1.0)) {
                violations.push(format!("{label} row {}", row.iter));
            }
        }
    }
    outcome(
        violations.is_empty() && rows > 0,
        format!(
            "{rows} rows over {} runs, {} violations{}",
            traces.0.len(),
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

fn opf_convergence(traces: &mut Traces) -> Outcome {
    let cfg = SolverConfig {
        tol_gap: OPF_GAP,
        max_iter: OPF_MAX_ITERS,
        ..SolverConfig::default()
    };
    let (mut worst_gap, mut worst_resid, mut max_iters, mut slowest) = (0.0_f64, 0.0_f64, 0, Duration::ZERO);
    let mut pass = true;
    for seed in 0..SEEDS {
        let problem = generate_opf(100, 2, seed).unwrap();
        let start = Instant::now();
        let r = solve_reduced(&problem, &cfg).unwrap();
        let elapsed = start.elapsed();
        traces.keep(format!("opf seed {seed}"), &r);
        pass &= r.relative_gap <= OPF_GAP
            && r.primal_residual <= OPF_RESIDUAL
            && r.iterations <= OPF_MAX_ITERS
            && elapsed < OPF_BUDGET;
        worst_gap = worst_gap.max(r.relative_gap);
        worst_resid = worst_resid.max(r.primal_residual);
        max_iters = max_iters.max(r.iterations);
        slowest = slowest.max(elapsed);
    }
    outcome(
        pass,
        format!("worst gap {worst_gap:.2e}, worst residual {worst_resid:.2e}, max {max_iters} iterations, slowest {slowest:.2?}"),
    )
}

fn cfmm_routing(traces: &mut Traces) -> Outcome {
    let reduced_cfg = SolverConfig {
        tol_gap: CFMM_GAP,
        tol_grad: 1e-10,
        ..SolverConfig::default()
    };
    let extended_cfg = SolverConfig {
        tol_gap: CFMM_PENALTY_GAP,
        ..SolverConfig::default()
    };
    let mut pass = true;
    let (mut worst_gap, mut min_y, mut worst_pen_gap, mut worst_kkt, mut slowest) =
        (0.0_f64, f64::INFINITY, 0.0_f64, 0.0_f64, Duration::ZERO);
    for seed in 0..SEEDS {
        let problem = generate_cfmm(100, seed, false).unwrap();
        let start = Instant::now();
        let r = solve_reduced(&problem, &reduced_cfg).unwrap();
        slowest = slowest.max(start.elapsed());
        traces.keep(format!("cfmm seed {seed}"), &r);
        let y_min = r.y_hat.iter().copied().fold(f64::INFINITY, f64::min);
        pass &= r.relative_gap <= CFMM_GAP && y_min >= CFMM_MIN_Y && start.elapsed() < CFMM_BUDGET;
        worst_gap = worst_gap.max(r.relative_gap);
        min_y = min_y.min(y_min);

        let penalized = generate_cfmm(100, seed, true).unwrap();
        let start = Instant::now();
        let r = solve_extended(&penalized, &extended_cfg).unwrap();
        slowest = slowest.max(start.elapsed());
        traces.keep(format!("penalized cfmm seed {seed}"), &r);
        let report = check_optimality(&penalized, &r, CFMM_PENALTY_KKT).unwrap();
        pass &= r.relative_gap <= CFMM_PENALTY_GAP && report.passes() && start.elapsed() < CFMM_BUDGET;
        worst_pen_gap = worst_pen_gap.max(r.relative_gap);
        worst_kkt = worst_kkt
            .max(report.max_support_violation)
            .max(report.max_stationarity_violation)
            .max(report.primal_residual);
    }
    outcome(
        pass,
        format!(
            "reduced: worst gap {worst_gap:.2e}, min y {min_y:.2e}; penalized: worst gap {worst_pen_gap:.2e}, \
             worst residual {worst_kkt:.2e}; slowest {slowest:.2?}"
        ),
    )
}

fn battery_scenario(traces: &mut Traces) -> Outcome {
    let start = Instant::now();
    let with = three_node_preset(120, true).unwrap();
    let counts_ok = with.num_nodes() == 360 && with.num_edges() == 359;
    let without = with
        .retain_edges(|_, e| !matches!(e, Edge::Gain(g) if matches!(g.gain(), Gain::Storage { .. })))
        .unwrap();
    let cfg = SolverConfig::default();
    let a = solve(&with, &cfg).unwrap();
    let b = solve(&without, &cfg).unwrap();
    traces.keep("preset with battery", &a);
    traces.keep("preset without battery", &b);
    // The objective is minus the total cost.
    let (cost_with, cost_without) = (-a.primal_value, -b.primal_value);
    let improvement = (cost_without - cost_with) / cost_without;
    let elapsed = start.elapsed();
    outcome(
        counts_ok
            && a.status == Status::Optimal
            && b.status == Status::Optimal
            && cost_with <= cost_without
            && improvement >= BATTERY_MIN_IMPROVEMENT
            && elapsed < BATTERY_BUDGET,
        format!(
            "{} nodes, {} edges; cost {cost_with:.4} with battery vs {cost_without:.4} without \
             ({:.1}% lower), {elapsed:.2?}",
            with.num_nodes(),
            with.num_edges(),
            100.0 * improvement
        ),
    )
}

fn no_flow_soundness() -> Outcome {
    const FAMILIES: &[&str] = &["powerline", "storage", "lossless", "uniswap", "balancer"];
    let mut rng = rng(8000);
    let (mut hits, mut disagreements) = (0usize, 0usize);
    while hits < NO_FLOW_SAMPLES {
        let (gain, ub) = random_gain(&mut rng, FAMILIES);
        let edge = GainEdge::new(IncidenceMap::pair(0, 1), gain, ub).unwrap();
        let eta = [rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0)];
        if !edge.no_flow_check(eta).unwrap() {
            continue;
        }
        hits += 1;
        if edge.bisect_wstar(eta[0] / eta[1], NO_FLOW_TOL).unwrap() > NO_FLOW_TOL {
            disagreements += 1;
        }
    }
    outcome(disagreements == 0, format!("{hits} no-flow pairs, {disagreements} disagreements"))
}

fn cli_trace(bin: &str, problem: &Path, trace: &Path, threads: usize) -> Vec<u8> {
    let status = Command::new(bin)
        .arg("solve")
        .arg(problem)
        .arg("--out")
        .arg(trace.with_extension("json"))
        .arg("--trace")
        .arg(trace)
        .args(["--threads", &threads.to_string(), "--deterministic"])
        .status()
        .unwrap();
    assert!(status.code().is_some());
    std::fs::read(trace).unwrap()
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_convexflows");
    let dir = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for seed in 0..SEEDS {
        let instances = [
            ("opf", generate_opf(100, 2, seed).unwrap()),
            ("cfmm", generate_cfmm(100, seed, false).unwrap()),
            ("cfmm-penalized", generate_cfmm(100, seed, true).unwrap()),
        ];
        for (name, problem) in instances {
            let path = dir.path().join(format!("{name}-{seed}.json"));
            std::fs::write(&path, problem_to_json(&problem, None).unwrap()).unwrap();
            let traces: Vec<Vec<u8>> = [1, 4, 8]
                .iter()
                .map(|&t| cli_trace(bin, &path, &dir.path().join(format!("{name}-{seed}-{t}.csv")), t))
                .collect();
            compared += 1;
            if traces.iter().any(|t| t != &traces[0]) {
                mismatches.push(format!("{name} seed {seed}"));
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{compared} instances at 1/4/8 threads, mismatches: {mismatches:?}"),
    )
}

fn fisher_market(traces: &mut Traces) -> Outcome {
    let start = Instant::now();
    let (n_b, n_g) = (5, 5);
    let problem = generate_fisher(n_b, n_g, 0).unwrap();
    let r = solve(&problem, &SolverConfig::default()).unwrap();
    traces.keep("fisher", &r);
    let report = check_optimality(&problem, &r, FISHER_KKT).unwrap();
    let min_utility = r.y_hat[..n_b].iter().copied().fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    outcome(
        r.status == Status::Optimal && min_utility > 0.0 && report.passes() && elapsed < FISHER_BUDGET,
        format!(
            "{}, min buyer utility {min_utility:.4}, support {:.1e}, gap {:.1e}, residual {:.1e}, {elapsed:.2?}",
            r.status, report.max_support_violation, report.gap, report.primal_residual
        ),
    )
}

fn main() {
    let mut traces = Traces::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "gradient matches finite differences", gradient_correctness()));
    results.push((2, "closed-form arbitrage matches bisection", closed_form_vs_bisection()));
    results.push((3, "solver matches brute-force grid oracle", grid_equivalence(&mut traces)));
    results.push((5, "opf n=100 T=2 converges", opf_convergence(&mut traces)));
    results.push((6, "cfmm routing converges", cfmm_routing(&mut traces)));
    results.push((7, "battery lowers three-node cost", battery_scenario(&mut traces)));
    results.push((8, "no-flow shortcut is sound", no_flow_soundness()));
    results.push((9, "traces identical across thread counts", determinism()));
    results.push((10, "fisher market clears", fisher_market(&mut traces)));
    results.insert(3, (4, "weak duality on every trace row", weak_duality(&traces)));

    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag}: {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
