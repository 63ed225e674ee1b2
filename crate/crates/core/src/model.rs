//! The hash network: embedding lookup, a stack of tanh layers, and a linear
//! hash layer whose output is binarized by sign.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hamming::CodeMatrix;
use crate::triplet::NodeRef;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Fully connected layer `y = x·W + b` with `W` stored `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, &w) in y.iter_mut().zip(self.weight.row(i)) {
                *yj += xi * w;
            }
        }
        y
    }

    /// Accumulates `dL/dW += xᵀ·g`, `dL/db += g` and returns `dL/dx = W·g`.
    fn backprop(&self, x: &[f64], g: &[f64], grad: &mut Dense) -> Vec<f64> {
        for (gb, &gj) in grad.bias.iter_mut().zip(g) {
            *gb += gj;
        }
        let mut gx = vec![0.0; x.len()];
        for (i, &xi) in x.iter().enumerate() {
            let w_row = self.weight.row(i);
            let gw_row = grad.weight.row_mut(i);
            let mut acc = 0.0;
            for ((gw, &w), &gj) in gw_row.iter_mut().zip(w_row).zip(g) {
                *gw += xi * gj;
                acc += w * gj;
            }
            gx[i] = acc;
        }
        gx
    }

    fn add_scaled(&mut self, other: &Dense, scale: f64) {
        for (a, &b) in self.weight.data.iter_mut().zip(&other.weight.data) {
            *a += scale * b;
        }
        for (a, &b) in self.bias.iter_mut().zip(&other.bias) {
            *a += scale * b;
        }
    }

    fn sum_squares(&self) -> f64 {
        self.weight.data.iter().chain(&self.bias).map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub code_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 200,
            hidden_dims: vec![320, 320, 320],
            code_len: 256,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.code_len == 0 {
            return Err(Error::config("embedding width and code length must be at least 1"));
        }
        if self.hidden_dims.is_empty() {
            return Err(Error::config("at least one hidden layer is required"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::config("hidden layer widths must be at least 1"));
        }
        Ok(())
    }

    /// Widths from the embedding through the hash layer.
    pub fn shape_chain(&self) -> Vec<usize> {
        let mut chain = vec![self.embed_dim];
        chain.extend(&self.hidden_dims);
        chain.push(self.code_len);
        chain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embed: Matrix,
    pub layers: Vec<Dense>,
    pub hash: Dense,
    /// Relaxed code of the virtual node, optimized directly.
    pub virtual_code: Vec<f64>,
}

/// Every intermediate of one forward pass: `inputs[0]` is the embedding row,
/// `inputs[l]` the tanh output of layer `l`, the last entry feeds the hash layer.
#[derive(Debug, Clone)]
pub struct Trace {
    pub node: usize,
    pub inputs: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl ModelParams {
    /// Xavier-uniform weights, zero biases, embedding rows uniform in
    /// `[-0.1, 0.1]`, zero virtual code.
    pub fn init(num_nodes: usize, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if num_nodes == 0 {
            return Err(Error::config("model needs at least one node"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut embed = Matrix::zeros(num_nodes, config.embed_dim);
        let emb_dist = Uniform::new_inclusive(-0.1, 0.1);
        for v in embed.as_mut_slice() {
            *v = emb_dist.sample(&mut rng);
        }
        let chain = config.shape_chain();
        let mut dense: Vec<Dense> = chain
            .windows(2)
            .map(|w| {
                let mut layer = Dense::zeros(w[0], w[1]);
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                for v in layer.weight.as_mut_slice() {
                    *v = dist.sample(&mut rng);
                }
                layer
            })
            .collect();
        let hash = dense.pop().expect("shape chain has at least two layers");
        Ok(ModelParams {
            config: config.clone(),
            embed,
            layers: dense,
            hash,
            virtual_code: vec![0.0; config.code_len],
        })
    }

    /// Same shapes as [`ModelParams::init`], every value zero.
    pub fn zeros(num_nodes: usize, config: &ModelConfig) -> Result<Self> {
        let mut p = Self::init(num_nodes, config)?;
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(p)
    }

    pub fn num_nodes(&self) -> usize {
        self.embed.rows()
    }

    pub fn code_len(&self) -> usize {
        self.config.code_len
    }

    pub fn forward(&self, node: NodeRef) -> Result<Vec<f64>> {
        match node {
            NodeRef::Virtual => Ok(self.virtual_code.clone()),
            NodeRef::Node(n) => Ok(self.trace(n)?.output),
        }
    }

    pub fn trace(&self, node: usize) -> Result<Trace> {
        if node >= self.num_nodes() {
            return Err(Error::NodeOutOfRange {
                node,
                num_nodes: self.num_nodes(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        inputs.push(self.embed.row(node).to_vec());
        for layer in &self.layers {
            let mut h = layer.apply(inputs.last().unwrap());
            h.iter_mut().for_each(|v| *v = v.tanh());
            inputs.push(h);
        }
        let output = self.hash.apply(inputs.last().unwrap());
        Ok(Trace {
            node,
            inputs,
            output,
        })
    }

    /// Backpropagates `dL/dx` for one traced node into `grads`.
    pub fn backprop(&self, trace: &Trace, grad_output: &[f64], grads: &mut Gradients) {
        let last = trace.inputs.len() - 1;
        let mut g = self
            .hash
            .backprop(&trace.inputs[last], grad_output, &mut grads.hash);
        for l in (0..self.layers.len()).rev() {
            // inputs[l + 1] = tanh(z_l)
            for (gi, &h) in g.iter_mut().zip(&trace.inputs[l + 1]) {
                *gi *= 1.0 - h * h;
            }
            g = self.layers[l].backprop(&trace.inputs[l], &g, &mut grads.layers[l]);
        }
        let row = grads
            .embed
            .entry(trace.node)
            .or_insert_with(|| vec![0.0; g.len()]);
        for (r, v) in row.iter_mut().zip(&g) {
            *r += v;
        }
    }

    /// Squared l2 norm of layer and hash-layer weights and biases.
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().map(Dense::sum_squares).sum::<f64>() + self.hash.sum_squares()
    }

    /// All tensors in checkpoint order: embedding, each layer's weight then
    /// bias, hash weight, hash bias, virtual code.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.embed.as_slice()];
        for l in self.layers.iter().chain(std::iter::once(&self.hash)) {
            out.push(l.weight.as_slice());
            out.push(&l.bias);
        }
        out.push(&self.virtual_code);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.embed.as_mut_slice()];
        for l in self.layers.iter_mut().chain(std::iter::once(&mut self.hash)) {
            out.push(l.weight.as_mut_slice());
            out.push(&mut l.bias);
        }
        out.push(&mut self.virtual_code);
        out
    }

    /// `param ← param − lr·grad` on every tensor.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (node, g) in &grads.embed {
            for (p, v) in self.embed.row_mut(*node).iter_mut().zip(g) {
                *p -= lr * v;
            }
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.add_scaled(g, -lr);
        }
        self.hash.add_scaled(&grads.hash, -lr);
        for (p, v) in self.virtual_code.iter_mut().zip(&grads.virtual_code) {
            *p -= lr * v;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn encode_all(&self) -> Result<CodeMatrix> {
        let codes = (0..self.num_nodes())
            .map(|n| binarize(&self.trace(n)?.output))
            .collect::<Result<Vec<_>>>()?;
        CodeMatrix::new(self.code_len(), codes)
    }

    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let c = &self.config;
        out.write_all(&(c.embed_dim as u32).to_le_bytes())?;
        out.write_all(&(c.hidden_dims.len() as u32).to_le_bytes())?;
        for &h in &c.hidden_dims {
            out.write_all(&(h as u32).to_le_bytes())?;
        }
        out.write_all(&(c.code_len as u32).to_le_bytes())?;
        out.write_all(&(self.num_nodes() as u64).to_le_bytes())?;
        out.write_all(&c.seed.to_le_bytes())?;
        for t in self.tensors() {
            for v in t {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::data("not a model checkpoint (bad magic)"));
        }
        let version = read_u32(&mut input)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::data(format!("unsupported checkpoint version {version}")));
        }
        let embed_dim = read_u32(&mut input)? as usize;
        let layers = read_u32(&mut input)? as usize;
        let hidden_dims = (0..layers)
            .map(|_| read_u32(&mut input).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let code_len = read_u32(&mut input)? as usize;
        let num_nodes = read_u64(&mut input)? as usize;
        let seed = read_u64(&mut input)?;
        let config = ModelConfig {
            embed_dim,
            hidden_dims,
            code_len,
            seed,
        };
        let mut params = ModelParams::zeros(num_nodes, &config)?;
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                let mut buf = [0u8; 8];
                input.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(Error::data("trailing bytes after checkpoint tensors"));
        }
        Ok(params)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"SGNHASH\0";
const CHECKPOINT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Gradients with the shapes of [`ModelParams`]. Embedding gradients are kept
/// only for rows that received any.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embed: BTreeMap<usize, Vec<f64>>,
    pub layers: Vec<Dense>,
    pub hash: Dense,
    pub virtual_code: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            embed: BTreeMap::new(),
            layers: params
                .layers
                .iter()
                .map(|l| Dense::zeros(l.fan_in(), l.fan_out()))
                .collect(),
            hash: Dense::zeros(params.hash.fan_in(), params.hash.fan_out()),
            virtual_code: vec![0.0; params.virtual_code.len()],
        }
    }

    /// Adds `other` into `self`; embedding rows merge in ascending node order.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (node, g) in &other.embed {
            let row = self.embed.entry(*node).or_insert_with(|| vec![0.0; g.len()]);
            for (a, b) in row.iter_mut().zip(g) {
                *a += b;
            }
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_scaled(b, 1.0);
        }
        self.hash.add_scaled(&other.hash, 1.0);
        for (a, b) in self.virtual_code.iter_mut().zip(&other.virtual_code) {
            *a += b;
        }
    }

    /// Adds `2·alpha·θ` for every layer weight and bias.
    pub fn add_weight_decay(&mut self, params: &ModelParams, alpha: f64) {
        for (g, p) in self.layers.iter_mut().zip(&params.layers) {
            g.add_scaled(p, 2.0 * alpha);
        }
        self.hash.add_scaled(&params.hash, 2.0 * alpha);
    }

    /// Dense tensors in the order of [`ModelParams::tensors`].
    pub fn to_dense(&self, num_nodes: usize) -> Vec<Vec<f64>> {
        let width = self.layers.first().map_or(0, Dense::fan_in);
        let mut embed = Matrix::zeros(num_nodes, width);
        for (node, g) in &self.embed {
            embed.row_mut(*node).copy_from_slice(g);
        }
        let mut out = vec![embed.data];
        for l in self.layers.iter().chain(std::iter::once(&self.hash)) {
            out.push(l.weight.data.clone());
            out.push(l.bias.clone());
        }
        out.push(self.virtual_code.clone());
        out
    }
}

/// Packed ±1 code. Bit `m` lives in word `m / 64` at position `63 - m % 64`
/// (most significant first); a set bit means `+1`. Trailing bits are zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HashCode {
    words: Vec<u64>,
    len: usize,
}

impl HashCode {
    pub fn from_signs(signs: &[bool]) -> Self {
        let mut words = vec![0u64; signs.len().div_ceil(64)];
        for (m, &s) in signs.iter().enumerate() {
            if s {
                words[m / 64] |= 1u64 << (63 - m % 64);
            }
        }
        HashCode {
            words,
            len: signs.len(),
        }
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() != len.div_ceil(64) {
            return Err(Error::DimensionMismatch {
                expected: len.div_ceil(64),
                got: words.len(),
            });
        }
        let rem = len % 64;
        if rem != 0 && words[words.len() - 1] & (u64::MAX >> rem) != 0 {
            return Err(Error::data("nonzero padding bits in hash code"));
        }
        Ok(HashCode { words, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, m: usize) -> bool {
        self.words[m / 64] >> (63 - m % 64) & 1 == 1
    }

    /// The code as `±1.0` values.
    pub fn to_signs(&self) -> Vec<f64> {
        (0..self.len)
            .map(|m| if self.bit(m) { 1.0 } else { -1.0 })
            .collect()
    }

    pub fn complement(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        let rem = self.len % 64;
        if rem != 0 {
            let last = words.len() - 1;
            words[last] &= !(u64::MAX >> rem);
        }
        HashCode {
            words,
            len: self.len,
        }
    }
}

/// Sign binarization; exact zero maps to `+1`.
pub fn binarize(x: &[f64]) -> Result<HashCode> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN in relaxed code".into()));
    }
    let signs: Vec<bool> = x.iter().map(|&v| v >= 0.0).collect();
    Ok(HashCode::from_signs(&signs))
}
