//! Signed edge-list ingestion and the immutable adjacency it produces.
//!
//! Input lines are `src dst sign` with `sign` in `{1, -1}`, separated by
//! tabs or spaces. Lines starting with the comment prefix are skipped.
//! Cleaning drops self-loops, exact duplicates, and every edge on an
//! unordered node pair that carries both signs. Nodes left without any
//! edge never receive a dense index.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn from_label(v: i64) -> Option<Sign> {
        match v {
            1 => Some(Sign::Positive),
            -1 => Some(Sign::Negative),
            _ => None,
        }
    }

    pub fn label(self) -> i64 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }
}

/// Which adjacency a neighbor query reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Out-edges only, as stored in the file.
    Out,
    /// Symmetric closure of the out-edges.
    Undirected,
}

#[derive(Debug, Clone)]
pub struct EdgeListFormat {
    pub comment_prefix: String,
    /// Accept and ignore columns after the sign (some dumps carry timestamps).
    pub allow_extra_columns: bool,
}

impl Default for EdgeListFormat {
    fn default() -> Self {
        EdgeListFormat {
            comment_prefix: "#".to_string(),
            allow_extra_columns: false,
        }
    }
}

/// What cleaning removed. Conflicts are counted as unordered node pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleaningReport {
    pub lines_read: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    pub conflict_pairs: usize,
    pub conflict_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphStats {
    pub num_nodes: usize,
    pub num_pos_links: usize,
    pub num_neg_links: usize,
    pub pos_fraction: f64,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "num_nodes\t{}", self.num_nodes)?;
        writeln!(f, "num_pos_links\t{}", self.num_pos_links)?;
        writeln!(f, "num_neg_links\t{}", self.num_neg_links)?;
        writeln!(f, "pos_fraction\t{:.6}", self.pos_fraction)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedGraph {
    pos_out: Vec<Vec<usize>>,
    neg_out: Vec<Vec<usize>>,
    pos_und: Vec<Vec<usize>>,
    neg_und: Vec<Vec<usize>>,
    ids: Vec<u64>,
    index: HashMap<u64, usize>,
    /// Surviving edges in input order, dense indices.
    edges: Vec<(usize, usize, Sign)>,
    num_pos: usize,
    num_neg: usize,
}

impl SignedGraph {
    /// Builds a cleaned graph from raw `(src, dst, sign)` records in input order.
    pub fn from_edges<I>(edges: I) -> Result<(SignedGraph, CleaningReport)>
    where
        I: IntoIterator<Item = (u64, u64, Sign)>,
    {
        let mut report = CleaningReport::default();
        let mut seen: HashSet<(u64, u64, Sign)> = HashSet::new();
        let mut kept: Vec<(u64, u64, Sign)> = Vec::new();
        let mut pair_signs: HashMap<(u64, u64), (bool, bool)> = HashMap::new();

        for (src, dst, sign) in edges {
            report.lines_read += 1;
            if src == dst {
                report.self_loops += 1;
                continue;
            }
            if !seen.insert((src, dst, sign)) {
                report.duplicates += 1;
                continue;
            }
            let entry = pair_signs.entry((src.min(dst), src.max(dst))).or_default();
            match sign {
                Sign::Positive => entry.0 = true,
                Sign::Negative => entry.1 = true,
            }
            kept.push((src, dst, sign));
        }

        let conflicted: HashSet<(u64, u64)> = pair_signs
            .into_iter()
            .filter(|(_, (p, n))| *p && *n)
            .map(|(k, _)| k)
            .collect();
        report.conflict_pairs = conflicted.len();
        if !conflicted.is_empty() {
            let before = kept.len();
            kept.retain(|&(s, d, _)| !conflicted.contains(&(s.min(d), s.max(d))));
            report.conflict_edges = before - kept.len();
            log::warn!(
                "dropped {} edges on {} node pairs carrying both signs",
                report.conflict_edges,
                report.conflict_pairs
            );
        }

        if kept.is_empty() {
            return Err(Error::EmptyGraph);
        }

        let mut ids = Vec::new();
        let mut index = HashMap::new();
        let mut dense = |ext: u64, ids: &mut Vec<u64>| -> usize {
            *index.entry(ext).or_insert_with(|| {
                ids.push(ext);
                ids.len() - 1
            })
        };
        let mut edges_dense = Vec::with_capacity(kept.len());
        for &(s, d, sign) in &kept {
            let s = dense(s, &mut ids);
            let d = dense(d, &mut ids);
            edges_dense.push((s, d, sign));
        }

        let n = ids.len();
        let mut pos_out = vec![Vec::new(); n];
        let mut neg_out = vec![Vec::new(); n];
        let mut pos_und = vec![Vec::new(); n];
        let mut neg_und = vec![Vec::new(); n];
        let (mut num_pos, mut num_neg) = (0, 0);
        for &(s, d, sign) in &edges_dense {
            let (out, und) = match sign {
                Sign::Positive => {
                    num_pos += 1;
                    (&mut pos_out, &mut pos_und)
                }
                Sign::Negative => {
                    num_neg += 1;
                    (&mut neg_out, &mut neg_und)
                }
            };
            out[s].push(d);
            und[s].push(d);
            und[d].push(s);
        }
        for list in pos_out
            .iter_mut()
            .chain(neg_out.iter_mut())
            .chain(pos_und.iter_mut())
            .chain(neg_und.iter_mut())
        {
            list.sort_unstable();
            list.dedup();
        }

        let graph = SignedGraph {
            pos_out,
            neg_out,
            pos_und,
            neg_und,
            ids,
            index,
            edges: edges_dense,
            num_pos,
            num_neg,
        };
        Ok((graph, report))
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn num_pos_links(&self) -> usize {
        self.num_pos
    }

    pub fn num_neg_links(&self) -> usize {
        self.num_neg
    }

    pub fn stats(&self) -> GraphStats {
        let total = (self.num_pos + self.num_neg) as f64;
        GraphStats {
            num_nodes: self.num_nodes(),
            num_pos_links: self.num_pos,
            num_neg_links: self.num_neg,
            pos_fraction: self.num_pos as f64 / total,
        }
    }

    /// Sorted neighbors of `node` with the given sign.
    pub fn neighbors(&self, node: usize, sign: Sign, direction: Direction) -> Result<&[usize]> {
        self.check_node(node)?;
        let lists = match (sign, direction) {
            (Sign::Positive, Direction::Out) => &self.pos_out,
            (Sign::Negative, Direction::Out) => &self.neg_out,
            (Sign::Positive, Direction::Undirected) => &self.pos_und,
            (Sign::Negative, Direction::Undirected) => &self.neg_und,
        };
        Ok(&lists[node])
    }

    /// Sign of the edge between two nodes in the requested adjacency, if any.
    pub fn edge_sign(&self, a: usize, b: usize, direction: Direction) -> Option<Sign> {
        if a >= self.num_nodes() || b >= self.num_nodes() {
            return None;
        }
        let has = |lists: &Vec<Vec<usize>>| lists[a].binary_search(&b).is_ok();
        let (pos, neg) = match direction {
            Direction::Out => (&self.pos_out, &self.neg_out),
            Direction::Undirected => (&self.pos_und, &self.neg_und),
        };
        if has(pos) {
            Some(Sign::Positive)
        } else if has(neg) {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    /// Directed edges in input order, dense indices.
    pub fn edges(&self) -> &[(usize, usize, Sign)] {
        &self.edges
    }

    pub fn external_id(&self, node: usize) -> Result<u64> {
        self.check_node(node)?;
        Ok(self.ids[node])
    }

    pub fn external_ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn dense_index(&self, external: u64) -> Option<usize> {
        self.index.get(&external).copied()
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.num_nodes() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node,
                num_nodes: self.num_nodes(),
            })
        }
    }

    /// Writes the cleaned edges as an edge list with external ids. Parsing the
    /// output reproduces this graph exactly.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for &(s, d, sign) in &self.edges {
            writeln!(out, "{}\t{}\t{}", self.ids[s], self.ids[d], sign.label())?;
        }
        Ok(())
    }
}

/// Parses an edge list and cleans it into a [`SignedGraph`].
pub fn parse_edge_list<R: BufRead>(
    reader: R,
    format: &EdgeListFormat,
) -> Result<(SignedGraph, CleaningReport)> {
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !format.comment_prefix.is_empty() && trimmed.starts_with(&format.comment_prefix) {
            continue;
        }
        records.push(parse_line(trimmed, line_no, format)?);
    }
    SignedGraph::from_edges(records)
}

fn parse_line(line: &str, line_no: usize, format: &EdgeListFormat) -> Result<(u64, u64, Sign)> {
    let err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 3 || (fields.len() > 3 && !format.allow_extra_columns) {
        return Err(err(format!(
            "expected 3 fields `src dst sign`, found {}",
            fields.len()
        )));
    }
    let id = |s: &str| {
        s.parse::<u64>()
            .map_err(|_| err(format!("invalid node id `{s}`")))
    };
    let src = id(fields[0])?;
    let dst = id(fields[1])?;
    let sign = fields[2]
        .parse::<i64>()
        .ok()
        .and_then(Sign::from_label)
        .ok_or_else(|| err(format!("sign must be 1 or -1, found `{}`", fields[2])))?;
    Ok((src, dst, sign))
}
