//! Mini-batch SGD over the triplet corpus with a linearly decaying learning
//! rate, and the geometric learning-rate range sweep.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::model::{ModelConfig, ModelParams};
use crate::objective::{batch_gradients_threaded, LossBreakdown, LossConfig};
use crate::triplet::{batches, build_triplets, SamplerConfig, Triplet, TripletCorpus};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub sampler: SamplerConfig,
    pub lr_init: f64,
    pub lr_final: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffles. Initialization uses `model.seed`.
    pub seed: u64,
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            loss: LossConfig::default(),
            sampler: SamplerConfig::default(),
            lr_init: 0.009,
            lr_final: 0.0009,
            epochs: 100,
            batch_size: 512,
            seed: 0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.loss.validate(self.model.code_len)?;
        if !(self.lr_final > 0.0) || !(self.lr_init >= self.lr_final) {
            return Err(Error::config("learning rates need lr_init >= lr_final > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Linear interpolation from `lr_init` at epoch 0 to `lr_final` at the last epoch.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::config(format!(
            "epoch {epoch} outside schedule of {} epochs",
            config.epochs
        )));
    }
    if config.epochs == 1 {
        return Ok(config.lr_init);
    }
    let frac = epoch as f64 / (config.epochs - 1) as f64;
    Ok(config.lr_init + (config.lr_final - config.lr_init) * frac)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Sum of the batch losses seen during the epoch.
    pub loss: LossBreakdown,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn totals(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss.total()).collect()
    }

    /// `epoch lr total triplet virtual quant reg`, tab separated, one line per
    /// epoch. Wall-clock time is left out so reports compare byte for byte.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.epochs {
            let l = &e.loss;
            writeln!(
                out,
                "{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}",
                e.epoch,
                e.lr,
                l.total(),
                l.triplet,
                l.virtual_,
                l.quantization,
                l.regularization
            )?;
        }
        Ok(())
    }
}

/// Decorrelates per-epoch shuffle seeds.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn train(graph: &SignedGraph, config: &TrainConfig) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    let corpus = build_triplets(graph, &config.sampler)?;
    let params = ModelParams::init(graph.num_nodes(), &config.model)?;
    train_corpus(params, &corpus, config)
}

/// Runs the full schedule from the given starting parameters.
pub fn train_corpus(
    mut params: ModelParams,
    corpus: &TripletCorpus,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let lr = lr_at(config, epoch)?;
        let mut epoch_loss = LossBreakdown::default();
        for (b, batch) in batches(corpus, config.batch_size, mix_seed(config.seed, epoch as u64))?
            .iter()
            .enumerate()
        {
            let loss = sgd_step(&mut params, batch, config, lr)?;
            if !loss.total().is_finite() || !params.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: loss.total(),
                });
            }
            epoch_loss += loss;
        }
        let seconds = start.elapsed().as_secs_f64();
        log::info!(
            "epoch {epoch} lr {lr:.6} loss {:.6} ({seconds:.2}s)",
            epoch_loss.total()
        );
        report.epochs.push(EpochRecord {
            epoch,
            lr,
            loss: epoch_loss,
            seconds,
        });
    }
    Ok((params, report))
}

/// One update `param ← param − lr·grad`; returns the loss at the pre-update
/// parameters.
pub fn sgd_step(
    params: &mut ModelParams,
    batch: &[Triplet],
    config: &TrainConfig,
    lr: f64,
) -> Result<LossBreakdown> {
    let (loss, grads) = batch_gradients_threaded(batch, params, &config.loss, config.threads)?;
    if loss.total().is_finite() {
        params.sgd_step(&grads, lr);
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LrRange {
    /// `(lr, batch loss)` in sweep order.
    pub points: Vec<(f64, f64)>,
    /// Whether the sweep stopped on a non-finite loss (the last point).
    pub diverged: bool,
}

impl LrRange {
    /// The swept rate with the lowest finite loss.
    pub fn best(&self) -> Option<(f64, f64)> {
        self.points
            .iter()
            .copied()
            .filter(|(_, l)| l.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (step, (lr, loss)) in self.points.iter().enumerate() {
            writeln!(out, "{step}\t{lr:e}\t{loss:e}")?;
        }
        Ok(())
    }
}

/// Raises the learning rate geometrically from `lr_min` to `lr_max` across
/// `steps` batches, one update per batch, recording each batch's loss.
pub fn lr_range_test(
    graph: &SignedGraph,
    config: &TrainConfig,
    lr_min: f64,
    lr_max: f64,
    steps: usize,
) -> Result<LrRange> {
    if !(lr_min > 0.0) || !(lr_min < lr_max) {
        return Err(Error::config("lr range needs 0 < lr_min < lr_max"));
    }
    if steps == 0 {
        return Err(Error::config("lr range needs at least one step"));
    }
    config.validate()?;
    let corpus = build_triplets(graph, &config.sampler)?;
    let mut params = ModelParams::init(graph.num_nodes(), &config.model)?;
    let ratio = lr_max / lr_min;
    let mut out = LrRange::default();
    let mut pass = 0u64;
    let mut queue: Vec<Vec<Triplet>> = Vec::new();
    for step in 0..steps {
        if queue.is_empty() {
            queue = batches(&corpus, config.batch_size, mix_seed(config.seed, pass))?;
            queue.reverse();
            pass += 1;
        }
        let batch = queue.pop().expect("refilled above");
        let lr = if steps == 1 {
            lr_min
        } else if step == steps - 1 {
            lr_max
        } else {
            lr_min * ratio.powf(step as f64 / (steps - 1) as f64)
        };
        let loss = sgd_step(&mut params, &batch, config, lr)?.total();
        out.points.push((lr, loss));
        if !loss.is_finite() || !params.all_finite() {
            out.diverged = true;
            break;
        }
    }
    Ok(out)
}
