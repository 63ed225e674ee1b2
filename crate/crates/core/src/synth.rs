//! Planted-partition signed graphs for desk-scale experiments.
//!
//! Nodes are split into equal blocks. Each unordered pair inside a block is
//! linked with probability `p_intra` and labelled positive; each pair across
//! blocks is linked with probability `p_inter` and labelled negative. The
//! sign of every generated link is then flipped with probability `noise`,
//! and its direction is drawn uniformly.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Sign, SignedGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPartition {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        PlantedPartition {
            blocks: 2,
            nodes_per_block: 40,
            p_intra: 0.2,
            p_inter: 0.2,
            noise: 0.05,
            seed: 0,
        }
    }
}

/// Generator bookkeeping: nodes touched by at least one link, and link counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SynthTally {
    pub nodes: usize,
    pub pos: usize,
    pub neg: usize,
}

#[derive(Debug, Clone)]
pub struct SynthGraph {
    pub edges: Vec<(u64, u64, Sign)>,
    /// Block of node `n` (external id `n`).
    pub block_of: Vec<usize>,
    pub tally: SynthTally,
}

impl PlantedPartition {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.nodes_per_block == 0 {
            return Err(Error::config("blocks and nodes_per_block must be at least 1"));
        }
        for (name, p) in [
            ("p_intra", self.p_intra),
            ("p_inter", self.p_inter),
            ("noise", self.noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SynthGraph> {
        self.validate()?;
        let n = self.blocks * self.nodes_per_block;
        let block_of: Vec<usize> = (0..n).map(|v| v / self.nodes_per_block).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut edges = Vec::new();
        let mut touched = vec![false; n];
        let mut tally = SynthTally::default();
        for u in 0..n {
            for v in u + 1..n {
                let same = block_of[u] == block_of[v];
                let p = if same { self.p_intra } else { self.p_inter };
                if !rng.gen_bool(p) {
                    continue;
                }
                let flip = rng.gen_bool(self.noise);
                let sign = if same != flip { Sign::Positive } else { Sign::Negative };
                let (s, d) = if rng.gen_bool(0.5) { (u, v) } else { (v, u) };
                match sign {
                    Sign::Positive => tally.pos += 1,
                    Sign::Negative => tally.neg += 1,
                }
                touched[u] = true;
                touched[v] = true;
                edges.push((s as u64, d as u64, sign));
            }
        }
        tally.nodes = touched.iter().filter(|&&t| t).count();
        Ok(SynthGraph {
            edges,
            block_of,
            tally,
        })
    }
}

impl SynthGraph {
    pub fn to_graph(&self) -> Result<SignedGraph> {
        SignedGraph::from_edges(self.edges.iter().copied()).map(|(g, _)| g)
    }

    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for &(s, d, sign) in &self.edges {
            writeln!(out, "{s}\t{d}\t{}", sign.label())?;
        }
        Ok(())
    }
}
