//! Triplet supervision drawn from the signed adjacency.
//!
//! A triplet `(i, j, k)` says node `i` should sit closer to `j` (a positive
//! neighbor) than to `k` (a negative neighbor). Anchors without negative
//! neighbors are paired with the virtual node instead.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Direction, Sign, SignedGraph};

/// A node of the graph or the virtual node, whose code is a free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Node(usize),
    Virtual,
}

impl NodeRef {
    pub fn node(self) -> Option<usize> {
        match self {
            NodeRef::Node(n) => Some(n),
            NodeRef::Virtual => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: NodeRef,
}

impl Triplet {
    pub fn is_virtual(&self) -> bool {
        self.negative == NodeRef::Virtual
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.negative {
            NodeRef::Node(k) => k as i64,
            NodeRef::Virtual => -1,
        };
        write!(f, "{} {} {}", self.anchor, self.positive, k)
    }
}

/// When an anchor without negative neighbors gets a virtual triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VirtualRule {
    /// The anchor itself has no negative neighbor.
    #[default]
    OneHop,
    /// Additionally, none of the anchor's neighbors has a negative neighbor.
    TwoHop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub direction: Direction,
    pub virtual_rule: VirtualRule,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            direction: Direction::Undirected,
            virtual_rule: VirtualRule::OneHop,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripletCorpus {
    pub real: Vec<Triplet>,
    pub virtual_: Vec<Triplet>,
}

impl TripletCorpus {
    pub fn len(&self) -> usize {
        self.real.len() + self.virtual_.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triplet> {
        self.real.iter().chain(self.virtual_.iter())
    }

    /// One `i j k` line per triplet; `k = -1` marks the virtual node.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        for t in self.iter() {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }
}

/// Enumerates every triplet in ascending `(i, j, k)` order.
pub fn build_triplets(graph: &SignedGraph, config: &SamplerConfig) -> Result<TripletCorpus> {
    if graph.num_pos_links() == 0 {
        return Err(Error::NoSupervision);
    }
    let dir = config.direction;
    let mut corpus = TripletCorpus::default();
    for i in 0..graph.num_nodes() {
        let pos = graph.neighbors(i, Sign::Positive, dir)?;
        let neg = graph.neighbors(i, Sign::Negative, dir)?;
        if pos.is_empty() {
            continue;
        }
        if !neg.is_empty() {
            for &j in pos {
                for &k in neg {
                    corpus.real.push(Triplet {
                        anchor: i,
                        positive: j,
                        negative: NodeRef::Node(k),
                    });
                }
            }
        } else if virtual_eligible(graph, i, config)? {
            corpus.virtual_.extend(pos.iter().map(|&j| Triplet {
                anchor: i,
                positive: j,
                negative: NodeRef::Virtual,
            }));
        }
    }
    Ok(corpus)
}

fn virtual_eligible(graph: &SignedGraph, anchor: usize, config: &SamplerConfig) -> Result<bool> {
    match config.virtual_rule {
        VirtualRule::OneHop => Ok(true),
        VirtualRule::TwoHop => {
            for &j in graph.neighbors(anchor, Sign::Positive, config.direction)? {
                if !graph.neighbors(j, Sign::Negative, config.direction)?.is_empty() {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Shuffles the whole corpus with a seeded generator and splits it into
/// chunks of at most `batch_size`.
pub fn batches(corpus: &TripletCorpus, batch_size: usize, seed: u64) -> Result<Vec<Vec<Triplet>>> {
    if batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut all: Vec<Triplet> = corpus.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    Ok(all.chunks(batch_size).map(<[Triplet]>::to_vec).collect())
}
