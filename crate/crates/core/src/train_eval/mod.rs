//! Self-supervised link training, streaming evaluation, node
//! classification and ablation sweeps.

mod engine;
pub mod metrics;
mod report;
pub mod synthetic;
mod unrolled;

pub use engine::{BatchScores, Engine, EngineCheckpoint};
pub use report::{console_table, write_text, ReportHeader, SweepRow};
pub use unrolled::unrolled_loss;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, Graph, Tensor};
use crate::model::{Model, ModelConfig, Query};
use crate::rng::CounterRng;
use crate::sampler::SamplerConfig;
use crate::stream::{
    assign_labels_to_links, chronological_split, inductive_mask, NodeId, SplitView, TemporalLink,
    TemporalStream, DEFAULT_RATIOS,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub negatives_per_positive: usize,
    /// Negatives per positive for MRR.
    pub eval_negatives: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub model: ModelConfig,
    pub split: (f64, f64, f64),
    /// Node mask probability for inductive runs.
    pub mask_prob: f64,
    pub node_epochs: usize,
    pub node_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            epochs: 5,
            lr: 1e-4,
            negatives_per_positive: 1,
            eval_negatives: 500,
            seed: 0,
            sampler: SamplerConfig::default(),
            model: ModelConfig::default(),
            split: DEFAULT_RATIOS,
            mask_prob: 0.1,
            node_epochs: 30,
            node_lr: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.eval_negatives == 0 || self.negatives_per_positive == 0 {
            return Err(Error::Config("negative counts must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite() && self.node_lr > 0.0 && self.node_lr.is_finite())
        {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mask_prob) {
            return Err(Error::Config(format!(
                "mask_prob {} not in [0, 1]",
                self.mask_prob
            )));
        }
        self.sampler.validate(0)?;
        self.model.validate()
    }

    /// Model dimensions adjusted to the stream's edge features and classes.
    pub fn model_for(&self, stream: &TemporalStream) -> ModelConfig {
        ModelConfig {
            edge_dim: stream.features.dim(),
            num_classes: stream.num_classes.max(2),
            ..self.model
        }
    }
}

/// Metrics are `None` when undefined for the run (e.g. no node labels).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: Option<f64>,
    pub ap: Option<f64>,
    pub mrr: Option<f64>,
    pub f1: Option<f64>,
    /// Mean wall time of one training epoch.
    pub train_epoch_s: f64,
    /// Wall time of the evaluation pass.
    pub test_s: f64,
    /// Mean query-path time (lookup, embed, head) per evaluated batch.
    pub latency_s: f64,
    pub queries: usize,
}

impl EvalReport {
    pub fn is_finite(&self) -> bool {
        [self.auc, self.ap, self.mrr, self.f1]
            .iter()
            .flatten()
            .all(|v| v.is_finite())
            && [self.train_epoch_s, self.test_s, self.latency_s]
                .iter()
                .all(|v| v.is_finite())
    }
}

/// Uniform destination sampler over a node set that never returns the
/// positive destination.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    nodes: Vec<NodeId>,
}

impl NegativeSampler {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut nodes: Vec<NodeId> = nodes.into_iter().collect();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.len() < 2 {
            return Err(Error::Config(
                "negative sampling needs at least 2 nodes".into(),
            ));
        }
        Ok(Self { nodes })
    }

    pub fn for_links(links: &[TemporalLink]) -> Result<Self> {
        Self::new(TemporalStream::nodes_in(links))
    }

    pub fn sample(&self, positive: NodeId, rng: &mut impl Rng) -> NodeId {
        loop {
            let n = self.nodes[rng.random_range(0..self.nodes.len())];
            if n != positive {
                return n;
            }
        }
    }
}

/// Per-epoch training summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub batch_losses: Vec<f64>,
    pub mean_loss: f64,
    pub seconds: f64,
}

const NEG_STREAM: u64 = 0x6e65_6700;
const DROPOUT_STREAM: u64 = 0x6472_6f70;
const EVAL_STREAM: u64 = 0x6576_616c;

/// One pass over `links` in chronological batches: sample negatives,
/// embed from the current snapshots and statuses, take an Adam step on
/// the binary cross-entropy, then apply the batch.
pub fn train_epoch(
    engine: &mut Engine<'_>,
    links: &[TemporalLink],
    negatives: &NegativeSampler,
    opt: &mut Adam<f32>,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    let start = Instant::now();
    let root = CounterRng::new(cfg.seed);
    let mut neg_rng = root.derive(NEG_STREAM).stream(epoch as u64);
    let mut drop_rng = root.derive(DROPOUT_STREAM).stream(epoch as u64);
    let k = cfg.negatives_per_positive;
    let mut batch_losses = Vec::with_capacity(links.len().div_ceil(cfg.batch_size));
    for (bi, batch) in links.chunks(cfg.batch_size).enumerate() {
        let mut negs = Vec::with_capacity(k * batch.len());
        for _ in 0..k {
            negs.extend(batch.iter().map(|l| negatives.sample(l.dst, &mut neg_rng)));
        }
        let loss = engine
            .train_batch(batch, &negs, opt, &mut drop_rng)
            .map_err(|e| Error::NonFinite(format!("epoch {epoch}, batch {bi}: {e}")))?;
        batch_losses.push(loss);
    }
    let mean_loss = batch_losses.iter().sum::<f64>() / batch_losses.len().max(1) as f64;
    Ok(EpochStats {
        batch_losses,
        mean_loss,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Streaming evaluation: each batch is scored with frozen parameters and
/// then applied to tables and statuses.
pub fn evaluate_links(
    engine: &mut Engine<'_>,
    links: &[TemporalLink],
    negatives: &NegativeSampler,
    cfg: &TrainConfig,
    salt: u64,
) -> Result<EvalReport> {
    let start = Instant::now();
    let mut rng = CounterRng::new(cfg.seed).derive(EVAL_STREAM).stream(salt);
    let (mut pos, mut neg, mut rpos, mut rneg) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut latency, mut batches) = (0.0, 0usize);
    for batch in links.chunks(cfg.batch_size) {
        let negs: Vec<NodeId> = batch
            .iter()
            .map(|l| negatives.sample(l.dst, &mut rng))
            .collect();
        let rank: Vec<Vec<NodeId>> = batch
            .iter()
            .map(|l| {
                (0..cfg.eval_negatives)
                    .map(|_| negatives.sample(l.dst, &mut rng))
                    .collect()
            })
            .collect();
        let s = engine.score_batch(batch, &negs, Some(&rank), &mut rng)?;
        latency += s.query_time.as_secs_f64();
        batches += 1;
        pos.extend(s.pos);
        neg.extend(s.neg);
        rpos.extend(s.rank_pos);
        rneg.extend(s.rank_neg);
    }
    let n = pos.len();
    let scores: Vec<f64> = pos.into_iter().chain(neg).collect();
    let labels: Vec<bool> = (0..scores.len()).map(|i| i < n).collect();
    let report = EvalReport {
        auc: metrics::roc_auc(&scores, &labels),
        ap: metrics::average_precision(&scores, &labels),
        mrr: metrics::mrr(&rpos, &rneg),
        f1: None,
        train_epoch_s: 0.0,
        test_s: start.elapsed().as_secs_f64(),
        latency_s: latency / batches.max(1) as f64,
        queries: n,
    };
    if !report.is_finite() {
        return Err(Error::NonFinite(format!("evaluation report {report:?}")));
    }
    Ok(report)
}

/// Applies `links` in batches with no predictions and no parameter updates.
pub fn replay(engine: &mut Engine<'_>, links: &[TemporalLink], batch_size: usize) -> Result<()> {
    for batch in links.chunks(batch_size.max(1)) {
        engine.replay_batch(batch)?;
    }
    Ok(())
}

/// Resets tables and statuses, replays the full (unmasked) train and val
/// prefix, then evaluates the test range.
pub fn evaluate_inductive(
    engine: &mut Engine<'_>,
    split: &SplitView,
    negatives: &NegativeSampler,
    cfg: &TrainConfig,
) -> Result<EvalReport> {
    engine.reset();
    let stream = engine.stream;
    replay(engine, split.train_val_links(stream), cfg.batch_size)?;
    evaluate_links(engine, split.test_links(stream), negatives, cfg, 2)
}

/// Result of [`run_link_task`].
#[derive(Debug, Clone)]
pub struct LinkRun {
    pub epochs: Vec<EpochStats>,
    pub val: EvalReport,
    pub test: EvalReport,
    pub model: Model<f32>,
    /// Engine state at the train/val boundary after the last epoch.
    pub boundary: EngineCheckpoint,
    pub split: SplitView,
}

/// Trains for `cfg.epochs` on the train range (node-masked if
/// `inductive`), then evaluates val and test. Transductive runs keep
/// streaming from the end of training; inductive runs score the test
/// range after a fresh replay of the unmasked prefix.
pub fn run_link_task(
    stream: &TemporalStream,
    cfg: &TrainConfig,
    inductive: bool,
) -> Result<LinkRun> {
    cfg.validate()?;
    let mut split = chronological_split(stream, cfg.split)?;
    if inductive {
        split = inductive_mask(&split, stream, cfg.mask_prob, cfg.seed);
    }
    let train_links = split.train_links(stream);
    let train_negs = NegativeSampler::for_links(&train_links)?;
    let eval_negs = NegativeSampler::for_links(&stream.links)?;
    let mut init_rng = CounterRng::new(cfg.seed).stream(0x696e_6974);
    let model = Model::new(cfg.model_for(stream), &mut init_rng)?;
    let mut engine = Engine::new(
        stream,
        model,
        SamplerConfig {
            seed: cfg.seed,
            ..cfg.sampler
        },
    )?;
    let mut opt = Adam::new(cfg.lr);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for e in 0..cfg.epochs {
        engine.reset();
        epochs.push(train_epoch(
            &mut engine,
            &train_links,
            &train_negs,
            &mut opt,
            cfg,
            e,
        )?);
    }
    let boundary = engine.checkpoint();
    let val = evaluate_links(&mut engine, split.val_links(stream), &eval_negs, cfg, 1)?;
    let mut test = if inductive {
        evaluate_inductive(&mut engine, &split, &eval_negs, cfg)?
    } else {
        evaluate_links(&mut engine, split.test_links(stream), &eval_negs, cfg, 2)?
    };
    let mean_epoch = epochs.iter().map(|e| e.seconds).sum::<f64>() / epochs.len().max(1) as f64;
    test.train_epoch_s = mean_epoch;
    let mut val = val;
    val.train_epoch_s = mean_epoch;
    Ok(LinkRun {
        epochs,
        val,
        test,
        model: engine.model,
        boundary,
        split,
    })
}

/// Embeddings recorded at label-bearing links, with their link positions.
#[derive(Debug, Clone, Default)]
pub struct NodeSamples {
    pub link_pos: Vec<usize>,
    pub embeddings: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
}

/// Streams the whole stream from a reset engine and records, for each
/// label, the labelled node's embedding at its link's time, taken just
/// before that link's batch is applied.
pub fn collect_node_samples(engine: &mut Engine<'_>, batch_size: usize) -> Result<NodeSamples> {
    let stream = engine.stream;
    let assignment = assign_labels_to_links(&stream.links, &stream.label_events());
    engine.reset();
    let mut out = NodeSamples::default();
    let mut next = 0;
    let bs = batch_size.max(1);
    for (bi, batch) in stream.links.chunks(bs).enumerate() {
        let end = (bi + 1) * bs;
        let first = next;
        while next < assignment.events.len() && assignment.events[next].link_pos < end {
            next += 1;
        }
        let events = &assignment.events[first..next];
        let queries: Vec<Query> = events
            .iter()
            .map(|e| Query {
                node: e.node,
                t: stream.links[e.link_pos].ts,
            })
            .collect();
        let z = engine.embed_then_apply(batch, &queries)?;
        for (e, z) in events.iter().zip(z) {
            out.link_pos.push(e.link_pos);
            out.embeddings.push(z);
            out.labels.push(e.label as usize);
        }
    }
    Ok(out)
}

/// Trains the node head of a copy of `model` on fixed embeddings and
/// reports AUC (two classes) and F1-micro on the test samples.
pub fn fit_node_head(
    model: &Model<f32>,
    train: (&[Vec<f32>], &[usize]),
    test: (&[Vec<f32>], &[usize]),
    cfg: &TrainConfig,
) -> Result<(EvalReport, Model<f32>)> {
    let classes = model.config().num_classes;
    let (xs, ys) = train;
    if let Some(&bad) = ys.iter().chain(test.1).find(|&&y| y >= classes) {
        return Err(Error::Invalid(format!(
            "label {bad} exceeds class count {classes}"
        )));
    }
    let mut present: Vec<usize> = ys.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Invalid(format!(
            "node classification needs at least 2 classes in the training labels, found {}",
            present.len()
        )));
    }
    let d = model.config().d_out;
    let to_tensor = |rows: &[&Vec<f32>]| {
        Tensor::new(
            rows.len(),
            d,
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
    };
    let start = Instant::now();
    let mut head = model.clone();
    let mut opt = Adam::new(cfg.node_lr);
    let mut rng = CounterRng::new(cfg.seed).stream(0x6e6f_6465);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for _ in 0..cfg.node_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(256) {
            let rows: Vec<&Vec<f32>> = chunk.iter().map(|&i| &xs[i]).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| ys[i]).collect();
            let mut g = Graph::new(true);
            let z = g.constant(to_tensor(&rows)?);
            let logits = head.node_logits(&mut g, z)?;
            let loss = g.softmax_cross_entropy(logits, &labels)?;
            if !g.scalar(loss).is_finite() {
                return Err(Error::NonFinite("node head loss".into()));
            }
            g.backward(loss, head.params_mut())?;
            opt.step(head.params_mut());
        }
    }
    let train_s = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let rows: Vec<&Vec<f32>> = test.0.iter().collect();
    let mut g = Graph::new(false);
    let z = g.constant(to_tensor(&rows)?);
    let logits = head.node_logits(&mut g, z)?;
    let l = g.value(logits);
    let pred: Vec<usize> = (0..l.rows)
        .map(|r| {
            l.row(r)
                .iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |best, (c, &v)| {
                    if v > best.1 {
                        (c, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect();
    let auc = if classes == 2 {
        let margin: Vec<f64> = (0..l.rows)
            .map(|r| (l.get(r, 1) - l.get(r, 0)) as f64)
            .collect();
        let truth: Vec<bool> = test.1.iter().map(|&y| y == 1).collect();
        metrics::roc_auc(&margin, &truth)
    } else {
        None
    };
    let report = EvalReport {
        auc,
        f1: metrics::f1_micro(&pred, test.1),
        train_epoch_s: train_s / cfg.node_epochs.max(1) as f64,
        test_s: start.elapsed().as_secs_f64(),
        latency_s: 0.0,
        queries: test.1.len(),
        ..Default::default()
    };
    Ok((report, head))
}

/// Node classification with a trained encoder: embeddings at every
/// label-bearing link, head fitted on labels inside the train range and
/// scored on labels inside the test range.
pub fn evaluate_nodes(
    engine: &mut Engine<'_>,
    split: &SplitView,
    cfg: &TrainConfig,
) -> Result<EvalReport> {
    let samples = collect_node_samples(engine, cfg.batch_size)?;
    let pick = |range: &std::ops::Range<usize>| {
        let idx: Vec<usize> = (0..samples.link_pos.len())
            .filter(|&i| range.contains(&samples.link_pos[i]))
            .collect();
        (
            idx.iter()
                .map(|&i| samples.embeddings[i].clone())
                .collect::<Vec<_>>(),
            idx.iter().map(|&i| samples.labels[i]).collect::<Vec<_>>(),
        )
    };
    let (tx, ty) = pick(&split.train);
    let (sx, sy) = pick(&split.test);
    fit_node_head(&engine.model, (&tx, &ty), (&sx, &sy), cfg).map(|(r, _)| r)
}

/// Which sampler knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Alpha,
    S,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Self::Alpha),
            "s" => Ok(Self::S),
            _ => Err(Error::Config(format!("unknown sweep axis {s:?} (alpha|s)"))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Alpha => "alpha",
            Self::S => "s",
        })
    }
}

impl SweepAxis {
    pub fn apply(self, base: &TrainConfig, value: f64) -> Result<TrainConfig> {
        let mut cfg = *base;
        match self {
            Self::Alpha => cfg.sampler.alpha = value,
            Self::S => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "slot count must be a non-negative integer, got {value}"
                    )));
                }
                cfg.sampler.slots = value as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Full train and evaluation for each value; every run shares the base
/// seed, so only the swept knob differs. Runs execute in parallel.
pub fn sweep(
    stream: &TemporalStream,
    base: &TrainConfig,
    axis: SweepAxis,
    values: &[f64],
    inductive: bool,
) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let cfgs = values
        .iter()
        .map(|&v| axis.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    cfgs.par_iter()
        .zip(values)
        .map(|(cfg, &value)| {
            let run = run_link_task(stream, cfg, inductive)?;
            Ok(SweepRow {
                axis,
                value,
                config: *cfg,
                final_loss: run.epochs.last().map_or(f64::NAN, |e| e.mean_loss),
                report: run.test,
            })
        })
        .collect()
}
