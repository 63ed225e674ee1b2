//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use signhash::eval::EdgeOperator;
use signhash::{
    batch_gradients, batch_loss, HashCode, LossConfig, ModelParams, NodeRef, Sign, SignedGraph, TrainConfig, Triplet,
};

/// Raw records over `ids` external ids with self-loops, duplicates and
/// conflicting signs all likely.
pub fn messy_edges(rng: &mut impl Rng, ids: u64, count: usize) -> Vec<(u64, u64, Sign)> {
    (0..count)
        .map(|_| {
            let s = if rng.gen_bool(0.5) { Sign::Positive } else { Sign::Negative };
            (rng.gen_range(0..ids) * 7 + 3, rng.gen_range(0..ids) * 7 + 3, s)
        })
        .collect()
}

/// Checks every ordered node triple against the undirected sign table built
/// straight from the cleaned edge list. Returns `(real, virtual)` sorted.
pub fn brute_triplets(graph: &SignedGraph) -> (Vec<Triplet>, Vec<Triplet>) {
    let n = graph.num_nodes();
    let mut sign: HashMap<(usize, usize), Sign> = HashMap::new();
    for &(a, b, s) in graph.edges() {
        sign.insert((a, b), s);
        sign.insert((b, a), s);
    }
    let e = |a: usize, b: usize| sign.get(&(a, b)).copied();
    let (mut real, mut virt) = (Vec::new(), Vec::new());
    for i in 0..n {
        let has_neg = (0..n).any(|k| e(i, k) == Some(Sign::Negative));
        for j in 0..n {
            if e(i, j) != Some(Sign::Positive) {
                continue;
            }
            if !has_neg {
                virt.push(Triplet {
                    anchor: i,
                    positive: j,
                    negative: NodeRef::Virtual,
                });
            }
            for k in 0..n {
                if e(i, k) == Some(Sign::Negative) {
                    real.push(Triplet {
                        anchor: i,
                        positive: j,
                        negative: NodeRef::Node(k),
                    });
                }
            }
        }
    }
    (real, virt)
}

/// Every pairwise comparison, ties one half.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut hits, mut pairs) = (0.0, 0.0);
    for (p, _) in scores.iter().zip(labels).filter(|(_, &l)| l) {
        for (q, _) in scores.iter().zip(labels).filter(|(_, &l)| !l) {
            pairs += 1.0;
            if p > q {
                hits += 1.0;
            } else if p == q {
                hits += 0.5;
            }
        }
    }
    hits / pairs
}

pub fn naive_hamming(a: &HashCode, b: &HashCode) -> u32 {
    (0..a.len()).filter(|&m| a.bit(m) != b.bit(m)).count() as u32
}

/// Full sort by `(distance, row)`.
pub fn brute_knn(codes: &[HashCode], query: &HashCode, k: usize) -> Vec<(usize, u32)> {
    let mut all: Vec<(usize, u32)> = codes.iter().enumerate().map(|(r, c)| (r, naive_hamming(query, c))).collect();
    all.sort_by_key(|&(r, d)| (d, r));
    all.truncate(k);
    all
}

pub fn random_code(rng: &mut impl Rng, d: usize) -> HashCode {
    let signs: Vec<bool> = (0..d).map(|_| rng.gen_bool(0.5)).collect();
    HashCode::from_signs(&signs)
}

/// Clustered codes so that distance ties are common.
pub fn clustered_codes(rng: &mut impl Rng, count: usize, d: usize) -> Vec<HashCode> {
    let centers: Vec<Vec<bool>> = (0..5).map(|_| (0..d).map(|_| rng.gen_bool(0.5)).collect()).collect();
    (0..count)
        .map(|_| {
            let c = &centers[rng.gen_range(0..centers.len())];
            let signs: Vec<bool> = c.iter().map(|&b| if rng.gen_bool(0.05) { !b } else { b }).collect();
            HashCode::from_signs(&signs)
        })
        .collect()
}

pub fn brute_feature(u: &[f64], v: &[f64], op: EdgeOperator) -> Vec<f64> {
    u.iter()
        .zip(v)
        .map(|(a, b)| match op {
            EdgeOperator::Hadamard => a * b,
            EdgeOperator::Average => (a + b) / 2.0,
            EdgeOperator::L1Weight => (a - b).abs(),
            EdgeOperator::L2Weight => (a - b) * (a - b),
        })
        .collect()
}

pub fn random_batch(rng: &mut impl Rng, num_nodes: usize, real: usize, virtual_: usize) -> Vec<Triplet> {
    let mut distinct3 = || loop {
        let a = rng.gen_range(0..num_nodes);
        let b = rng.gen_range(0..num_nodes);
        let c = rng.gen_range(0..num_nodes);
        if a != b && b != c && a != c {
            return (a, b, c);
        }
    };
    let mut out = Vec::new();
    for _ in 0..real {
        let (i, j, k) = distinct3();
        out.push(Triplet {
            anchor: i,
            positive: j,
            negative: NodeRef::Node(k),
        });
    }
    for _ in 0..virtual_ {
        let (i, j, _) = distinct3();
        out.push(Triplet {
            anchor: i,
            positive: j,
            negative: NodeRef::Virtual,
        });
    }
    out
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, absolute below a tiny norm.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, n)| (a - n) * (a - n)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = norm(analytic).max(norm(numeric));
    if denom < 1e-8 {
        diff
    } else {
        diff / denom
    }
}

/// Per-tensor relative error of the analytic gradient against central
/// differences with step `h`.
pub fn gradient_errors(params: &ModelParams, batch: &[Triplet], loss: &LossConfig, h: f64) -> Vec<f64> {
    let (_, grads) = batch_gradients(batch, params, loss).unwrap();
    let analytic = grads.to_dense(params.num_nodes());
    let mut work = params.clone();
    let n_tensors = work.tensors().len();
    let mut errors = Vec::with_capacity(n_tensors);
    for t in 0..n_tensors {
        let len = work.tensors()[t].len();
        let mut numeric = vec![0.0; len];
        for e in 0..len {
            let orig = work.tensors()[t][e];
            work.tensors_mut()[t][e] = orig + h;
            let up = batch_loss(batch, &work, loss).unwrap().total();
            work.tensors_mut()[t][e] = orig - h;
            let down = batch_loss(batch, &work, loss).unwrap().total();
            work.tensors_mut()[t][e] = orig;
            numeric[e] = (up - down) / (2.0 * h);
        }
        errors.push(relative_error(&analytic[t], &numeric));
    }
    errors
}

/// Small network with the sparse-network loss weights; trains the default
/// planted-partition graph in seconds.
pub fn desk_config() -> TrainConfig {
    let mut c = signhash::config::Preset::Slashdot.config();
    c.model.embed_dim = 32;
    c.model.hidden_dims = vec![64, 64, 64];
    c.model.code_len = 32;
    c.batch_size = 128;
    c
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
