//! Relaxed triplet ranking loss with quantization and weight penalties, and
//! its exact gradient by reverse-mode chain rule.
//!
//! For a batch the loss is
//!
//! ```text
//!   Σ_real    [θ(x_i,x_k) − θ(x_i,x_j) + δ ]₊
//! + Σ_virtual [θ(x_i,x_0) − θ(x_i,x_j) + δ₀]₊
//! + η Σ_m ‖sgn(x_m) − x_m‖²  +  α ‖ϑ‖²
//! ```
//!
//! with `θ(a,b) = ½⟨a,b⟩`. The quantization sum runs over the distinct nodes
//! of the batch (or all nodes with [`QuantizationScope::Full`]); `ϑ` is the
//! layer weights and biases. [`Reduction::Mean`] divides the ranking sums by
//! the batch size and the quantization sum by the number of code entries.

use std::collections::{BTreeSet, HashMap};
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams, Trace};
use crate::triplet::{NodeRef, Triplet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantizationScope {
    /// Nodes that appear in the batch.
    #[default]
    Batch,
    /// Every node, every batch.
    Full,
}

/// How the per-batch sums are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Ranking terms averaged over the batch's triplets, quantization averaged
    /// over the quantized code entries (nodes × d). The penalty is not scaled.
    #[default]
    Mean,
    /// Plain sums as written above.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub delta: f64,
    pub delta0: f64,
    pub eta: f64,
    pub alpha: f64,
    pub quantization: QuantizationScope,
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            delta: 24.0,
            delta0: 12.0,
            eta: 40.0,
            alpha: 1e-4,
            quantization: QuantizationScope::Batch,
            reduction: Reduction::Mean,
        }
    }
}

impl LossConfig {
    pub fn validate(&self, code_len: usize) -> Result<()> {
        let d = code_len as f64;
        if !(0.0..=d).contains(&self.delta) {
            return Err(Error::config(format!("delta {} outside [0, {d}]", self.delta)));
        }
        if !(0.0..=d).contains(&self.delta0) {
            return Err(Error::config(format!("delta0 {} outside [0, {d}]", self.delta0)));
        }
        if !(self.eta >= 0.0) || !(self.alpha >= 0.0) {
            return Err(Error::config("eta and alpha must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub triplet: f64,
    pub virtual_: f64,
    pub quantization: f64,
    pub regularization: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.triplet + self.virtual_ + self.quantization + self.regularization
    }
}

impl Add for LossBreakdown {
    type Output = LossBreakdown;

    fn add(mut self, rhs: LossBreakdown) -> LossBreakdown {
        self += rhs;
        self
    }
}

impl AddAssign for LossBreakdown {
    fn add_assign(&mut self, rhs: LossBreakdown) {
        self.triplet += rhs.triplet;
        self.virtual_ += rhs.virtual_;
        self.quantization += rhs.quantization;
        self.regularization += rhs.regularization;
    }
}

/// Half the inner product.
pub fn theta(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(0.5 * dot(a, b))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `[θ(x_i,x_k) − θ(x_i,x_j) + margin]₊`
pub fn triplet_hinge(xi: &[f64], xj: &[f64], xk: &[f64], margin: f64) -> Result<f64> {
    Ok((theta(xi, xk)? - theta(xi, xj)? + margin).max(0.0))
}

/// `Σ_m (b_m − x_m)²` against a fixed ±1 target.
pub fn quantization_error(x: &[f64], b: &[f64]) -> Result<f64> {
    if x.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: b.len(),
        });
    }
    Ok(x.iter().zip(b).map(|(x, b)| (b - x) * (b - x)).sum())
}

fn sign_target(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn batch_loss(batch: &[Triplet], params: &ModelParams, config: &LossConfig) -> Result<LossBreakdown> {
    evaluate(batch, params, config, false, 1).map(|(l, _)| l)
}

pub fn batch_gradients(
    batch: &[Triplet],
    params: &ModelParams,
    config: &LossConfig,
) -> Result<(LossBreakdown, Gradients)> {
    batch_gradients_threaded(batch, params, config, 1)
}

/// As [`batch_gradients`], fanning forward and backward passes out over
/// `threads` workers. Work is split into fixed-size node chunks reduced in
/// chunk order, so the result does not depend on the thread count.
pub fn batch_gradients_threaded(
    batch: &[Triplet],
    params: &ModelParams,
    config: &LossConfig,
    threads: usize,
) -> Result<(LossBreakdown, Gradients)> {
    evaluate(batch, params, config, true, threads).map(|(l, g)| (l, g.expect("gradients requested")))
}

const NODE_CHUNK: usize = 32;

fn evaluate(
    batch: &[Triplet],
    params: &ModelParams,
    config: &LossConfig,
    want_grad: bool,
    threads: usize,
) -> Result<(LossBreakdown, Option<Gradients>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let num_nodes = params.num_nodes();
    let d = params.code_len();

    let nodes: Vec<usize> = match config.quantization {
        QuantizationScope::Full => (0..num_nodes).collect(),
        QuantizationScope::Batch => {
            let mut set = BTreeSet::new();
            for t in batch {
                set.insert(t.anchor);
                set.insert(t.positive);
                if let NodeRef::Node(k) = t.negative {
                    set.insert(k);
                }
            }
            set.into_iter().collect()
        }
    };
    if let Some(&bad) = nodes.iter().find(|&&n| n >= num_nodes) {
        return Err(Error::NodeOutOfRange { node: bad, num_nodes });
    }
    let mut slot: HashMap<usize, usize> = HashMap::with_capacity(nodes.len());
    for (i, &n) in nodes.iter().enumerate() {
        slot.insert(n, i);
    }
    let lookup = |n: usize| -> Result<usize> {
        slot.get(&n)
            .copied()
            .ok_or(Error::NodeOutOfRange { node: n, num_nodes })
    };

    let traces: Vec<Trace> = chunked_map(&nodes, threads, |chunk| {
        chunk.iter().map(|&n| params.trace(n)).collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<Vec<Vec<Trace>>>>()?
    .into_iter()
    .flatten()
    .collect();

    let mut loss = LossBreakdown::default();
    let mut grad_x: Vec<Vec<f64>> = if want_grad {
        vec![vec![0.0; d]; nodes.len()]
    } else {
        Vec::new()
    };
    let mut grad_virtual = vec![0.0; d];
    let (rank_scale, quant_scale) = match config.reduction {
        Reduction::Sum => (1.0, 1.0),
        Reduction::Mean => (
            1.0 / batch.len() as f64,
            1.0 / (nodes.len() * d) as f64,
        ),
    };

    for t in batch {
        let i = lookup(t.anchor)?;
        let j = lookup(t.positive)?;
        let (xk, k, margin) = match t.negative {
            NodeRef::Node(k) => {
                let k = lookup(k)?;
                (&traces[k].output, Some(k), config.delta)
            }
            NodeRef::Virtual => (&params.virtual_code, None, config.delta0),
        };
        let xi = &traces[i].output;
        let xj = &traces[j].output;
        let arg = 0.5 * dot(xi, xk) - 0.5 * dot(xi, xj) + margin;
        if arg <= 0.0 {
            continue;
        }
        match k {
            Some(_) => loss.triplet += rank_scale * arg,
            None => loss.virtual_ += rank_scale * arg,
        }
        if want_grad {
            let half = 0.5 * rank_scale;
            for m in 0..d {
                grad_x[i][m] += half * (xk[m] - xj[m]);
                grad_x[j][m] -= half * xi[m];
            }
            match k {
                Some(k) => grad_x[k].iter_mut().zip(xi).for_each(|(g, x)| *g += half * x),
                None => grad_virtual.iter_mut().zip(xi).for_each(|(g, x)| *g += half * x),
            }
        }
    }

    if config.eta != 0.0 {
        let weight = config.eta * quant_scale;
        for (slot, tr) in traces.iter().enumerate() {
            let mut q = 0.0;
            for (m, &x) in tr.output.iter().enumerate() {
                let b = sign_target(x);
                q += (b - x) * (b - x);
                if want_grad {
                    grad_x[slot][m] += 2.0 * weight * (x - b);
                }
            }
            loss.quantization += weight * q;
        }
    }

    loss.regularization = config.alpha * params.weight_norm_sq();

    if !want_grad {
        return Ok((loss, None));
    }

    let work: Vec<(usize, &Trace)> = traces.iter().enumerate().collect();
    let partials = chunked_map(&work, threads, |chunk| {
        let mut g = Gradients::zeros_like(params);
        for &(slot, tr) in chunk {
            if grad_x[slot].iter().any(|&v| v != 0.0) {
                params.backprop(tr, &grad_x[slot], &mut g);
            }
        }
        g
    });
    let mut grads = Gradients::zeros_like(params);
    for g in &partials {
        grads.accumulate(g);
    }
    grads.virtual_code = grad_virtual;
    if config.alpha != 0.0 {
        grads.add_weight_decay(params, config.alpha);
    }
    Ok((loss, Some(grads)))
}

/// Maps fixed-size chunks of `items`, preserving chunk order.
fn chunked_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync,
{
    let chunks: Vec<&[T]> = items.chunks(NODE_CHUNK).collect();
    if threads <= 1 || chunks.len() <= 1 {
        return chunks.into_iter().map(&f).collect();
    }
    let per_worker = chunks.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .chunks(per_worker)
            .map(|group| {
                let f = &f;
                scope.spawn(move || group.iter().map(|c| f(c)).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("gradient worker panicked"))
            .collect()
    })
}
