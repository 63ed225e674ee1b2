//! Sign prediction from hash codes: edge features from node codes, an
//! L2-regularized logistic classifier, and stratified k-fold AUC.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Sign, SignedGraph};
use crate::hamming::CodeMatrix;
use crate::model::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeOperator {
    Hadamard,
    Average,
    L1Weight,
    L2Weight,
}

impl EdgeOperator {
    pub const ALL: [EdgeOperator; 4] = [
        EdgeOperator::Hadamard,
        EdgeOperator::Average,
        EdgeOperator::L1Weight,
        EdgeOperator::L2Weight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdgeOperator::Hadamard => "hadamard",
            EdgeOperator::Average => "average",
            EdgeOperator::L1Weight => "l1_weight",
            EdgeOperator::L2Weight => "l2_weight",
        }
    }

    fn combine(self, u: f64, v: f64) -> f64 {
        match self {
            EdgeOperator::Hadamard => u * v,
            EdgeOperator::Average => 0.5 * (u + v),
            EdgeOperator::L1Weight => (u - v).abs(),
            EdgeOperator::L2Weight => (u - v) * (u - v),
        }
    }
}

impl fmt::Display for EdgeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgeOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdgeOperator::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::config(format!("unknown edge operator `{s}`")))
    }
}

/// Element-wise combination of two node vectors.
pub fn edge_features(u: &[f64], v: &[f64], op: EdgeOperator) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(u.iter().zip(v).map(|(&a, &b)| op.combine(a, b)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations_run: usize,
}

impl LogisticModel {
    /// Linear decision value; ranks identically to the predicted probability.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.score(x)).exp())
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

fn check_classes(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::data("both classes must be present"));
    }
    Ok((pos, neg))
}

/// Minimizes mean log-loss plus `reg/2·‖w‖²` (bias unpenalized) by gradient
/// descent with step `1/L`, `L` the smoothness bound
/// `¼·max‖(x,1)‖² + reg`. Stops once the gradient norm drops below 1e-6.
pub fn fit_logistic(
    features: &Matrix,
    labels: &[bool],
    reg_strength: f64,
    iterations: usize,
) -> Result<LogisticModel> {
    if features.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.rows(),
            got: labels.len(),
        });
    }
    check_classes(labels)?;
    if !(reg_strength >= 0.0) {
        return Err(Error::config("reg_strength must be non-negative"));
    }
    let n = features.rows();
    let dim = features.cols();
    let max_sq = (0..n)
        .map(|r| features.row(r).iter().map(|v| v * v).sum::<f64>() + 1.0)
        .fold(0.0, f64::max);
    let step = 1.0 / (0.25 * max_sq + reg_strength);

    let mut model = LogisticModel {
        weights: vec![0.0; dim],
        bias: 0.0,
        iterations_run: 0,
    };
    let mut gw = vec![0.0; dim];
    for it in 0..iterations {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let x = features.row(r);
            let residual = model.probability(x) - if y { 1.0 } else { 0.0 };
            gb += residual;
            for (g, &xv) in gw.iter_mut().zip(x) {
                *g += residual * xv;
            }
        }
        let inv_n = 1.0 / n as f64;
        gb *= inv_n;
        for (g, &w) in gw.iter_mut().zip(&model.weights) {
            *g = *g * inv_n + reg_strength * w;
        }
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        model.iterations_run = it;
        if norm < 1e-6 {
            break;
        }
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= step * g;
        }
        model.bias -= step * gb;
        model.iterations_run = it + 1;
    }
    Ok(model)
}

/// Mann–Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
/// ties counted one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let (n_pos, n_neg) = check_classes(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Integer pair counts keep the result exact.
    let (mut wins, mut ties, mut neg_below) = (0u128, 0u128, 0u128);
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let group = &order[start..end];
        let pos = group.iter().filter(|&&i| labels[i]).count() as u128;
        let neg = group.len() as u128 - pos;
        wins += pos * neg_below;
        ties += pos * neg;
        neg_below += neg;
        start = end;
    }
    let pairs = n_pos as f64 * n_neg as f64;
    Ok((wins as f64 + 0.5 * ties as f64) / pairs)
}

/// Directed links labelled `true` for positive sign.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEdgeSet {
    pub edges: Vec<(usize, usize, bool)>,
}

impl LabeledEdgeSet {
    pub fn from_graph(graph: &SignedGraph) -> Result<Self> {
        let edges: Vec<(usize, usize, bool)> = graph
            .edges()
            .iter()
            .map(|&(u, v, s)| (u, v, s == Sign::Positive))
            .collect();
        let labels: Vec<bool> = edges.iter().map(|e| e.2).collect();
        check_classes(&labels).map_err(|_| {
            Error::data("link prediction needs both positive and negative links")
        })?;
        Ok(LabeledEdgeSet { edges })
    }

    pub fn labels(&self) -> Vec<bool> {
        self.edges.iter().map(|e| e.2).collect()
    }

    pub fn features(&self, codes: &CodeMatrix, op: EdgeOperator) -> Result<Matrix> {
        let d = codes.code_len();
        let signs: Vec<Vec<f64>> = codes.codes().iter().map(|c| c.to_signs()).collect();
        let mut data = Vec::with_capacity(self.edges.len() * d);
        for &(u, v, _) in &self.edges {
            let (cu, cv) = match (signs.get(u), signs.get(v)) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::data(format!("no code for edge ({u}, {v})"))),
            };
            data.extend(edge_features(cu, cv, op)?);
        }
        Matrix::from_vec(self.edges.len(), d, data)
    }

    /// Stratified fold index per edge: each class is shuffled separately and
    /// dealt round-robin across folds.
    pub fn stratified_folds(&self, folds: usize, seed: u64) -> Result<Vec<usize>> {
        if folds < 2 {
            return Err(Error::config("need at least 2 folds"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = vec![0; self.edges.len()];
        for class in [true, false] {
            let mut idx: Vec<usize> = (0..self.edges.len())
                .filter(|&i| self.edges[i].2 == class)
                .collect();
            if idx.len() < folds {
                return Err(Error::data(format!(
                    "only {} {} links for {folds} folds; every fold needs both classes",
                    idx.len(),
                    if class { "positive" } else { "negative" }
                )));
            }
            idx.shuffle(&mut rng);
            for (rank, i) in idx.into_iter().enumerate() {
                assignment[i] = rank % folds;
            }
        }
        Ok(assignment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub reg_strength: f64,
    pub iterations: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            seed: 0,
            reg_strength: 1e-3,
            iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorResult {
    pub operator: EdgeOperator,
    pub fold_aucs: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub results: Vec<OperatorResult>,
    pub code_len: usize,
    pub folds: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn mean(&self, op: EdgeOperator) -> Option<f64> {
        self.results.iter().find(|r| r.operator == op).map(|r| r.mean)
    }

    /// `operator fold auc` lines per fold, then `operator mean value` per operator.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.results {
            for (fold, a) in r.fold_aucs.iter().enumerate() {
                writeln!(out, "{}\t{fold}\t{a:.6}", r.operator)?;
            }
        }
        for r in &self.results {
            writeln!(out, "{}\tmean\t{:.6}", r.operator, r.mean)?;
        }
        Ok(())
    }
}

/// K-fold link-sign prediction. `codes` row `n` is the code of dense node `n`.
pub fn evaluate(
    graph: &SignedGraph,
    codes: &CodeMatrix,
    operators: &[EdgeOperator],
    config: &EvalConfig,
) -> Result<EvalReport> {
    if codes.len() != graph.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_nodes(),
            got: codes.len(),
        });
    }
    let set = LabeledEdgeSet::from_graph(graph)?;
    let labels = set.labels();
    let fold_of = set.stratified_folds(config.folds, config.seed)?;
    let mut results = Vec::with_capacity(operators.len());
    for &op in operators {
        let features = set.features(codes, op)?;
        let mut fold_aucs = Vec::with_capacity(config.folds);
        for fold in 0..config.folds {
            let (train_rows, test_rows): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| fold_of[i] != fold);
            let train_x = select_rows(&features, &train_rows)?;
            let train_y: Vec<bool> = train_rows.iter().map(|&i| labels[i]).collect();
            let model = fit_logistic(&train_x, &train_y, config.reg_strength, config.iterations)?;
            let scores: Vec<f64> = test_rows.iter().map(|&i| model.score(features.row(i))).collect();
            let test_y: Vec<bool> = test_rows.iter().map(|&i| labels[i]).collect();
            fold_aucs.push(auc(&scores, &test_y)?);
        }
        let mean = fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64;
        results.push(OperatorResult {
            operator: op,
            fold_aucs,
            mean,
        });
    }
    Ok(EvalReport {
        results,
        code_len: codes.code_len(),
        folds: config.folds,
        seed: config.seed,
    })
}

fn select_rows(m: &Matrix, rows: &[usize]) -> Result<Matrix> {
    let mut data = Vec::with_capacity(rows.len() * m.cols());
    for &r in rows {
        data.extend_from_slice(m.row(r));
    }
    Matrix::from_vec(rows.len(), m.cols(), data)
}
