//! Command-line front end. All tabular output is tab-separated text.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{self, Preset};
use crate::error::{Error, Result};
use crate::eval::{self, EdgeOperator, EvalConfig};
use crate::graph::{parse_edge_list, Direction, EdgeListFormat, SignedGraph};
use crate::hamming::{self, CodeMatrix};
use crate::model::ModelParams;
use crate::synth::PlantedPartition;
use crate::train::{self, TrainConfig};
use crate::triplet::{build_triplets, SamplerConfig, VirtualRule};

#[derive(Debug, Parser)]
#[command(name = "signhash", version, about = "Binary codes for signed networks")]
pub struct Cli {
    /// Worker threads for gradient evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Force ordered reductions. Reductions are always chunk-ordered, so this
    /// only documents intent.
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print node and link counts of a cleaned edge list.
    Stats {
        graph: PathBuf,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Dump the triplet corpus as `i j k` lines (`k = -1` is the virtual node).
    Sample {
        graph: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// Sample from out-edges instead of the undirected closure.
        #[arg(long)]
        directed: bool,
        /// Give virtual triplets only to anchors whose whole 2-hop neighborhood is positive.
        #[arg(long)]
        two_hop: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Train the hash network and write a checkpoint plus a per-epoch report.
    Train {
        graph: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Per-epoch loss report; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Print the resolved configuration to stderr before training.
        #[arg(long)]
        dump_config: bool,
    },
    /// Binarize every node with a trained checkpoint.
    Encode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Exact Hamming k-nearest neighbors by linear scan.
    Knn {
        #[arg(long)]
        codes: PathBuf,
        /// Query node ids (repeatable).
        #[arg(long = "query", short = 'q')]
        queries: Vec<u64>,
        /// Query every node in the code file.
        #[arg(long, conflicts_with = "queries")]
        all: bool,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// K-fold link sign prediction from codes.
    Eval {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        codes: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated subset of hadamard,average,l1_weight,l2_weight.
        #[arg(long, default_value = "hadamard,average,l1_weight,l2_weight")]
        operators: String,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// L2 strength of the logistic classifier.
        #[arg(long, default_value_t = 1e-3)]
        reg: f64,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Geometric learning-rate sweep, one update per batch.
    LrRange {
        graph: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 1e-5)]
        lr_min: f64,
        #[arg(long, default_value_t = 1.0)]
        lr_max: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Generate a planted-partition signed edge list.
    Synth {
        #[arg(long, default_value_t = 2)]
        blocks: usize,
        #[arg(long, default_value_t = 40)]
        nodes_per_block: usize,
        #[arg(long, default_value_t = 0.2)]
        p_intra: f64,
        #[arg(long, default_value_t = 0.2)]
        p_inter: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Ignore columns after the sign.
    #[arg(long)]
    pub extra_columns: bool,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// `epinions` or `slashdot`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` override (repeatable), applied after the file.
    #[arg(long = "set")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self, threads: usize) -> Result<TrainConfig> {
        let preset = self.preset.as_deref().map(str::parse::<Preset>).transpose()?;
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(require(p)?)?),
            None => None,
        };
        let mut overrides = vec![format!("threads={threads}")];
        overrides.extend(self.overrides.iter().cloned());
        config::resolve(preset, text.as_deref(), &overrides)
    }
}

fn require(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::config(format!("input file `{}` not found", path.display())))
    }
}

fn load_graph(path: &Path, input: &InputArgs) -> Result<SignedGraph> {
    let file = File::open(require(path)?)?;
    let format = EdgeListFormat {
        allow_extra_columns: input.extra_columns,
        ..Default::default()
    };
    let (graph, report) = parse_edge_list(BufReader::new(file), &format)?;
    log::info!(
        "cleaned {}: {} self-loops, {} duplicates, {} conflicting pairs ({} edges)",
        path.display(),
        report.self_loops,
        report.duplicates,
        report.conflict_pairs,
        report.conflict_edges
    );
    Ok(graph)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Loads a code file and reorders it to the graph's dense node order.
fn codes_for_graph(path: &Path, graph: &SignedGraph) -> Result<CodeMatrix> {
    let (ids, matrix) = hamming::read_codes(BufReader::new(File::open(require(path)?)?))?;
    let mut rows: Vec<Option<usize>> = vec![None; graph.num_nodes()];
    for (row, id) in ids.iter().enumerate() {
        if let Some(n) = graph.dense_index(*id) {
            rows[n] = Some(row);
        }
    }
    let codes = rows
        .iter()
        .enumerate()
        .map(|(n, r)| {
            r.map(|r| matrix.codes()[r].clone()).ok_or_else(|| {
                Error::data(format!("no code for node {}", graph.external_ids()[n]))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CodeMatrix::new(matrix.code_len(), codes)
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads.max(1);
    match cli.command {
        Command::Stats { graph, input } => {
            let g = load_graph(&graph, &input)?;
            let mut out = output(&None)?;
            write!(out, "{}", g.stats())?;
            out.flush()?;
        }
        Command::Sample {
            graph,
            input,
            directed,
            two_hop,
            out,
        } => {
            let g = load_graph(&graph, &input)?;
            let cfg = SamplerConfig {
                direction: if directed { Direction::Out } else { Direction::Undirected },
                virtual_rule: if two_hop { VirtualRule::TwoHop } else { VirtualRule::OneHop },
            };
            let corpus = build_triplets(&g, &cfg)?;
            eprintln!("real\t{}\nvirtual\t{}", corpus.real.len(), corpus.virtual_.len());
            let mut w = output(&out)?;
            corpus.write_dump(&mut w)?;
            w.flush()?;
        }
        Command::Train {
            graph,
            input,
            cfg,
            checkpoint,
            report,
            dump_config,
        } => {
            let config = cfg.resolve(threads)?;
            if dump_config {
                eprint!("{}", config::dump(&config));
            }
            let g = load_graph(&graph, &input)?;
            let (params, rep) = train::train(&g, &config)?;
            let mut ck = BufWriter::new(File::create(&checkpoint)?);
            params.write_checkpoint(&mut ck)?;
            ck.flush()?;
            let mut w = output(&report)?;
            rep.write_tsv(&mut w)?;
            w.flush()?;
        }
        Command::Encode {
            checkpoint,
            graph,
            input,
            out,
        } => {
            let params =
                ModelParams::read_checkpoint(BufReader::new(File::open(require(&checkpoint)?)?))?;
            let g = load_graph(&graph, &input)?;
            if params.num_nodes() != g.num_nodes() {
                return Err(Error::DimensionMismatch {
                    expected: g.num_nodes(),
                    got: params.num_nodes(),
                });
            }
            let codes = params.encode_all()?;
            let mut w = output(&out)?;
            hamming::write_codes(g.external_ids(), &codes, &mut w)?;
            w.flush()?;
        }
        Command::Knn {
            codes,
            queries,
            all,
            k,
            out,
        } => {
            let (ids, matrix) = hamming::read_codes(BufReader::new(File::open(require(&codes)?)?))?;
            let queries = if all { ids.clone() } else { queries };
            if queries.is_empty() {
                return Err(Error::config("give --query ids or --all"));
            }
            let mut w = output(&out)?;
            for q in queries {
                let row = ids
                    .iter()
                    .position(|&id| id == q)
                    .ok_or_else(|| Error::data(format!("query node {q} not in code file")))?;
                for (rank, (node, dist)) in matrix.knn(&matrix.codes()[row], k)?.into_iter().enumerate() {
                    writeln!(w, "{q}\t{}\t{}\t{dist}", rank + 1, ids[node])?;
                }
            }
            w.flush()?;
        }
        Command::Eval {
            graph,
            codes,
            input,
            operators,
            folds,
            seed,
            reg,
            iterations,
            out,
        } => {
            let ops = operators
                .split(',')
                .map(|s| s.trim().parse::<EdgeOperator>())
                .collect::<Result<Vec<_>>>()?;
            let g = load_graph(&graph, &input)?;
            let matrix = codes_for_graph(&codes, &g)?;
            let report = eval::evaluate(
                &g,
                &matrix,
                &ops,
                &EvalConfig {
                    folds,
                    seed,
                    reg_strength: reg,
                    iterations,
                },
            )?;
            let mut w = output(&out)?;
            report.write_tsv(&mut w)?;
            w.flush()?;
        }
        Command::LrRange {
            graph,
            input,
            cfg,
            lr_min,
            lr_max,
            steps,
            out,
        } => {
            let config = cfg.resolve(threads)?;
            let g = load_graph(&graph, &input)?;
            let sweep = train::lr_range_test(&g, &config, lr_min, lr_max, steps)?;
            if let Some((lr, loss)) = sweep.best() {
                log::info!("lowest loss {loss:e} at lr {lr:e}");
            }
            if sweep.diverged {
                log::warn!("sweep stopped early on a non-finite loss");
            }
            let mut w = output(&out)?;
            sweep.write_tsv(&mut w)?;
            w.flush()?;
        }
        Command::Synth {
            blocks,
            nodes_per_block,
            p_intra,
            p_inter,
            noise,
            seed,
            out,
        } => {
            let syn = PlantedPartition {
                blocks,
                nodes_per_block,
                p_intra,
                p_inter,
                noise,
                seed,
            }
            .generate()?;
            log::info!(
                "generated {} nodes, {} positive and {} negative links",
                syn.tally.nodes,
                syn.tally.pos,
                syn.tally.neg
            );
            let mut w = output(&out)?;
            syn.write_edge_list(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
