//! Acceptance suite. Runs every criterion, prints one line each, and fails if
//! any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use entrobound_core::determinization::Determinizer;
use entrobound_core::entropy_det::{right_resolve, scc, LabeledDigraph, RightResolvingGraph};
use entrobound_core::entropy_unc::{max_cycle_mean, max_path_weight, WeightedDigraph};
use entrobound_core::geometry::{CellId, CoverMode};
use entrobound_core::oracle::{expansion_check, karp_check, random_weighted_graph, word_growth};
use entrobound_core::pipeline::{execute, run, Pipeline, RunConfig, RunOutput, Settings};
use entrobound_core::synthesis::{build_abstraction, simulate_closed_loop};
use entrobound_core::systems::{builtin, linear2d, pendulum, uncertain_linear, ProblemDef, BUILTIN_NAMES};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn run_problem(problem: &ProblemDef, pipeline: Pipeline, tau: usize, det: Option<Determinizer>) -> RunOutput {
    let config = RunConfig {
        system: problem.name.clone(),
        pipeline,
        tau: Some(tau),
        determinizer: det,
        ..RunConfig::default()
    };
    let settings = Settings::resolve(problem, &config).expect("valid settings");
    execute(problem, settings).expect("pipeline runs")
}

fn within(limit: Duration, t: Instant) -> bool {
    t.elapsed() <= limit
}

fn example1_golden() -> Outcome {
    let t = Instant::now();
    let out = run(&RunConfig::new("example1", Pipeline::Det)).unwrap();
    let r = &out.report;
    let det = r.det.as_ref().unwrap();
    let rho = det.largest_component.as_ref().unwrap().rho;
    let bound = r.bound.unwrap();
    let ok = r.sizes.domain_cells == 9
        && r.sizes.partition_elements == 3
        && det.components == 1
        && det.nontrivial_components == 1
        && det.rr_nodes == 7
        && (rho - 2.41421).abs() <= 1e-4
        && (bound - 1.2716).abs() <= 1e-3
        && within(Duration::from_secs(1), t);
    outcome(
        ok,
        format!(
            "|B|={} |A|={} sccs={} rr={} rho={rho:.6} bound={bound:.6} in {:.3}s",
            r.sizes.domain_cells,
            r.sizes.partition_elements,
            det.components,
            det.rr_nodes,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn word_count_oracle() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in BUILTIN_NAMES {
        let p = builtin(name).unwrap();
        if p.system.is_uncertain() {
            continue;
        }
        let grid = p.state_grid(&p.eta_s).unwrap();
        if grid.len() > 64 {
            continue;
        }
        let out = run(&RunConfig::new(name, Pipeline::Det)).unwrap();
        let g = out.gamma.as_ref().unwrap();
        let h = out.report.det.as_ref().unwrap().h_ba;
        let growth = word_growth(g, 20).unwrap();
        ok &= (growth - h).abs() <= 0.05;
        parts.push(format!("{name}: h={h:.4} growth={growth:.4}"));
    }
    ok &= !parts.is_empty() && within(Duration::from_secs(10), t);
    outcome(ok, format!("{} in {:.2}s", parts.join(", "), t.elapsed().as_secs_f64()))
}

fn karp_correctness() -> Outcome {
    let t = Instant::now();
    let r = karp_check(200, 8, 20_240_601).unwrap();
    let ok = r.passed() && r.max_error <= 1e-12 && within(Duration::from_secs(5), t);
    outcome(
        ok,
        format!("{} graphs, max |karp - brute| = {:e} in {:.2}s", r.cases, r.max_error, t.elapsed().as_secs_f64()),
    )
}

fn gap_ok(g: &WeightedDigraph) -> (bool, f64) {
    let w = max_cycle_mean(g).unwrap().value;
    let n = g.len() as f64;
    let slack = n * n.log2() + n * g.max_weight();
    let mut ok = true;
    for tau in [g.len(), 10 * g.len(), 100 * g.len()] {
        let gap = (max_path_weight(g, tau) / tau as f64 - w).abs();
        ok &= gap <= slack / tau as f64 + 1e-12;
    }
    let gap = (max_path_weight(g, 1000) / 1000.0 - w).abs();
    (ok && gap <= 0.1, gap)
}

fn walk_mean_convergence() -> Outcome {
    let out = run(&RunConfig::new("uncertain-linear", Pipeline::Unc)).unwrap();
    let (mut ok, gap) = gap_ok(out.weighted.as_ref().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (o, g) = gap_ok(&random_weighted_graph(&mut rng, 10));
        ok &= o;
        worst = worst.max(g);
    }
    outcome(ok, format!("benchmark gap at 1000 = {gap:.4}, worst random gap = {worst:.4}"))
}

fn expansion_identity() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut cases = 0;
    for elements in 1..=3 {
        for tau in 1..=3 {
            let r = expansion_check(20, elements, tau, (10 * elements + tau) as u64).unwrap();
            ok &= r.passed();
            cases += r.cases;
        }
    }
    ok &= within(Duration::from_secs(60), t);
    outcome(ok, format!("{cases} instances exact in {:.2}s", t.elapsed().as_secs_f64()))
}

fn uncertain_linear_sweep() -> Outcome {
    let t = Instant::now();
    let table = [(0.2, 3.3219), (0.1, 4.3923), (0.09, 4.2811), (0.06, 5.0), (0.03, 6.4594)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (eta, reference) in table {
        let out = run_problem(&uncertain_linear(eta), Pipeline::Unc, 1, Some(Determinizer::MinSucc));
        let w = out.report.bound.unwrap();
        if eta == 0.2 {
            ok &= out.report.sizes.domain_cells == 109 && (w - reference).abs() <= 0.5;
        }
        ok &= (w - reference).abs() <= 0.7 && w >= 0.9316;
        parts.push(format!("{eta}:{w:.4}"));
    }
    ok &= within(Duration::from_secs(30), t);
    outcome(ok, format!("w* {} in {:.2}s", parts.join(" "), t.elapsed().as_secs_f64()))
}

fn det_bound_properties() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut check = |label: String, out: &RunOutput, theory: f64, ts: f64| -> bool {
        let r = &out.report;
        if r.empty_domain {
            parts.push(format!("{label}: empty"));
            return false;
        }
        let tau = r.settings.tau as f64;
        let per = r.det.as_ref().unwrap().h_ba / (tau * ts);
        let ceiling = (r.sizes.partition_elements as f64).log2() / (tau * ts);
        parts.push(format!("{label}: {per:.4}"));
        theory <= per && per <= ceiling + 1e-9
    };
    let lin = linear2d();
    let mut tau1 = f64::NAN;
    for tau in 1..=3 {
        for det in [Determinizer::MaxFreq, Determinizer::MinNorm] {
            let out = run_problem(&lin, Pipeline::Det, tau, Some(det));
            ok &= check(format!("lin tau={tau} {det}"), &out, 1.003, 1.0);
            if tau == 1 && det == Determinizer::MaxFreq {
                tau1 = out.report.bound.unwrap();
            }
        }
    }
    ok &= (1.003..=2.0).contains(&tau1);
    for ts in [0.8, 0.5, 0.1, 0.01, 0.001] {
        for det in [Determinizer::MaxFreq, Determinizer::MinNorm] {
            let out = run_problem(&pendulum(1.0, 1.0, ts), Pipeline::Det, 1, Some(det));
            ok &= check(format!("pend Ts={ts} {det}"), &out, 2.8854, ts);
        }
    }
    for tau in 2..=3 {
        let out = run_problem(&pendulum(1.0, 1.0, 0.01), Pipeline::Det, tau, None);
        ok &= check(format!("pend tau={tau}"), &out, 2.8854, 0.01);
    }
    ok &= within(Duration::from_secs(300), t);
    outcome(
        ok,
        format!("linear2d tau=1 bound {tau1:.4}; {} in {:.1}s", parts.join(", "), t.elapsed().as_secs_f64()),
    )
}

fn refinement_proposition() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (problem, det) in [
        (builtin("example1").unwrap(), Determinizer::MaxFreq),
        (linear2d(), Determinizer::MaxFreq),
        (linear2d(), Determinizer::MinNorm),
    ] {
        let out = run_problem(&problem, Pipeline::Both, 1, Some(det));
        let h = out.report.det.as_ref().unwrap().h_ba;
        let w = out.report.unc.as_ref().unwrap().w_star;
        ok &= w >= h;
        parts.push(format!("{} {det}: unc {w:.4} >= det {h:.4}", problem.name));
    }
    outcome(ok, parts.join(", "))
}

fn enclosure_sampling(problem: &ProblemDef, rng: &mut ChaCha8Rng) -> usize {
    let grid = problem.state_grid(&problem.eta_s).unwrap();
    let inputs = problem.input_grid(&problem.eta_i).unwrap();
    let sys = &problem.system;
    let mut violations = 0;
    for _ in 0..1000 {
        let cell = grid.cell_rect(CellId(rng.gen_range(0..grid.len()))).unwrap();
        let u = inputs.cell_center(CellId(rng.gen_range(0..inputs.len())));
        let enc = sys.reach(&cell, &u).unwrap().enclosure;
        for _ in 0..100 {
            let x: Vec<f64> = cell.lb().iter().zip(cell.ub()).map(|(&l, &h)| rng.gen_range(l..=h)).collect();
            let w: Option<Vec<f64>> = sys
                .disturbance
                .as_ref()
                .map(|d| d.lb().iter().zip(d.ub()).map(|(&l, &h)| rng.gen_range(l..=h)).collect());
            let y = sys.step(&x, &u, w.as_deref()).unwrap();
            let tol = 1e-9;
            if y.iter().zip(enc.lb().iter().zip(enc.ub())).any(|(&v, (&l, &h))| v < l - tol || v > h + tol) {
                violations += 1;
            }
        }
    }
    violations
}

fn words_of(g: &LabeledDigraph, nodes: &[u32], n: usize) -> BTreeSet<Vec<u32>> {
    let inside: BTreeSet<u32> = nodes.iter().copied().collect();
    let mut layer: BTreeSet<(u32, Vec<u32>)> = nodes.iter().map(|&v| (v, vec![g.label(v as usize)])).collect();
    for _ in 1..n {
        let mut next = BTreeSet::new();
        for (v, w) in &layer {
            for &s in g.successors(*v as usize) {
                if inside.contains(&s) {
                    let mut w2 = w.clone();
                    w2.push(g.label(s as usize));
                    next.insert((s, w2));
                }
            }
        }
        layer = next;
    }
    layer.into_iter().map(|(_, w)| w).collect()
}

fn rr_words(rr: &RightResolvingGraph, n: usize) -> BTreeSet<Vec<u32>> {
    let mut layer: BTreeSet<(u32, Vec<u32>)> = (0..rr.nodes.len() as u32).map(|v| (v, Vec::new())).collect();
    for _ in 0..n {
        let mut next = BTreeSet::new();
        for (v, w) in &layer {
            for &(a, b, l) in &rr.edges {
                if a == *v {
                    let mut w2 = w.clone();
                    w2.push(l);
                    next.insert((b, w2));
                }
            }
        }
        layer = next;
    }
    layer.into_iter().map(|(_, w)| w).collect()
}

fn language_mismatches(g: &LabeledDigraph) -> usize {
    let mut bad = 0;
    for c in scc(g.adjacency()).into_iter().filter(|c| !c.trivial) {
        let (rr, _) = right_resolve(g, &c.nodes).unwrap();
        bad += usize::from(!rr.is_right_resolving());
        for n in 1..=8 {
            bad += usize::from(rr_words(&rr, n) != words_of(g, &c.nodes, n));
        }
    }
    bad
}

fn soundness_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut parts = Vec::new();
    let mut total = 0;

    let systems = [builtin("example1").unwrap(), linear2d(), pendulum(1.0, 1.0, 0.01), builtin("henon").unwrap(), uncertain_linear(0.2)];
    let enc: usize = systems.iter().map(|p| enclosure_sampling(p, &mut rng)).sum();
    total += enc;
    parts.push(format!("enclosures {enc}"));

    let mut sim = 0;
    for p in [builtin("example1").unwrap(), linear2d(), pendulum(1.0, 1.0, 0.01), uncertain_linear(0.2)] {
        let abs = build_abstraction(&p, &p.eta_s, &p.eta_i, 1, CoverMode::Interior).unwrap();
        let ctrl = entrobound_core::synthesis::invariant_controller(&abs);
        let r = simulate_closed_loop(&p.system, &p.safe_set, &abs, &ctrl, 1000, 1000, 5).unwrap();
        sim += r.violations;
    }
    total += sim;
    parts.push(format!("simulation {sim}"));

    let out = run(&RunConfig::new("example1", Pipeline::Det)).unwrap();
    let mut lang = language_mismatches(out.gamma.as_ref().unwrap());
    for _ in 0..30 {
        let n = rng.gen_range(2..=20);
        let succ: Vec<Vec<u32>> = (0..n)
            .map(|_| {
                let mut s: Vec<u32> = (0..n as u32).filter(|_| rng.gen_bool(2.0 / n as f64)).collect();
                if s.is_empty() {
                    s.push(rng.gen_range(0..n as u32));
                }
                s
            })
            .collect();
        let labels = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let g = LabeledDigraph::new((0..n).map(CellId).collect(), succ, labels).unwrap();
        lang += language_mismatches(&g);
    }
    total += lang;
    parts.push(format!("language {lang}"));
    outcome(total == 0, format!("violations: {}", parts.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("example 1 golden run", example1_golden),
        ("spectral radius vs word growth", word_count_oracle),
        ("karp vs brute force", karp_correctness),
        ("long-walk convergence", walk_mean_convergence),
        ("expansion-number identity", expansion_identity),
        ("uncertain linear sweep", uncertain_linear_sweep),
        ("deterministic bound floor and ceiling", det_bound_properties),
        ("refinement inequality", refinement_proposition),
        ("soundness suite", soundness_suite),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("criterion {}: {} ({name}): {}", k + 1, if o.ok { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.ok);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
