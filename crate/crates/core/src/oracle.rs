//! Seeded random-instance checks of the graph algorithms against their
//! brute-force counterparts.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entropy_det::{count_words, LabeledDigraph};
use crate::entropy_unc::{brute_force_mcm, expansion_brute_force, expansion_oracle, max_cycle_mean, WeightedDigraph, MAX_FLAT_SEQUENCES};
use crate::error::Result;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OracleReport {
    pub cases: usize,
    pub failures: usize,
    /// Largest discrepancy seen.
    pub max_error: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Random digraph with `1..=max_nodes` nodes, out-degree at least one and
/// weights in `[0, 4)`.
pub fn random_weighted_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> WeightedDigraph {
    let n = rng.gen_range(1..=max_nodes);
    let succ = random_table(rng, n);
    let weights = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
    WeightedDigraph::new(succ, weights).expect("valid graph")
}

/// Nonempty successor set for each of `n` nodes.
pub fn random_table(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<u32>> {
    (0..n)
        .map(|_| {
            let mut s: Vec<u32> = (0..n as u32).filter(|_| rng.gen_bool(0.4)).collect();
            if s.is_empty() {
                s.push(rng.gen_range(0..n as u32));
            }
            s
        })
        .collect()
}

/// Karp against enumeration of simple cycles.
pub fn karp_check(cases: usize, max_nodes: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = OracleReport {
        cases,
        ..OracleReport::default()
    };
    for _ in 0..cases {
        let g = random_weighted_graph(&mut rng, max_nodes);
        let err = (max_cycle_mean(&g)?.value - brute_force_mcm(&g)?).abs();
        r.max_error = r.max_error.max(err);
        if err > 1e-12 {
            r.failures += 1;
        }
    }
    Ok(r)
}

/// Exhaustive spanning-set minimum against the walk count, plus the flat
/// search over all sequence sets when it is small enough.
pub fn expansion_check(cases: usize, elements: usize, tau: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = OracleReport {
        cases,
        ..OracleReport::default()
    };
    for _ in 0..cases {
        let table = random_table(&mut rng, elements);
        let e = expansion_oracle(elements, &table, tau)?;
        let mut ok = e.exhaustive == e.graph;
        if elements.pow(tau as u32) <= MAX_FLAT_SEQUENCES {
            ok &= expansion_brute_force(elements, &table, tau)? == e.graph;
        }
        if !ok {
            r.failures += 1;
            r.max_error = r.max_error.max(1.0);
        }
    }
    Ok(r)
}

fn to_f64(x: &BigUint) -> f64 {
    x.to_string().parse().unwrap_or(f64::INFINITY)
}

/// `log2(|W_{n+1}| / |W_n|)` for the label language of `g`.
pub fn word_growth(g: &LabeledDigraph, n: usize) -> Result<f64> {
    let a = count_words(g, n + 1)?;
    let b = count_words(g, n)?;
    Ok((to_f64(&a) / to_f64(&b)).log2())
}
