use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};

use crate::autodiff::{Adam, Graph, Tensor};
use crate::model::{Embedded, LocalStatus, Model, NodeState, Query};
use crate::sampler::{NeighborTable, SamplerConfig, SnapshotEntry};
use crate::stream::{NodeId, TemporalLink, TemporalStream, Timestamp};
use crate::{Error, Result};

/// Table, status and pending events at a batch boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineCheckpoint {
    pub state: NodeState<f32>,
    pub table: NeighborTable,
    pub pending: Vec<TemporalLink>,
}

const BOUNDARY_MAGIC: &[u8; 8] = b"NLBBNDY1";

impl EngineCheckpoint {
    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(BOUNDARY_MAGIC)?;
        self.state.write_checkpoint(w)?;
        self.table.write_checkpoint(w)?;
        w.write_all(&(self.pending.len() as u64).to_le_bytes())?;
        for l in &self.pending {
            w.write_all(&l.src.to_le_bytes())?;
            w.write_all(&l.dst.to_le_bytes())?;
            w.write_all(&l.ts.to_le_bytes())?;
            w.write_all(&l.edge_feat.unwrap_or(u32::MAX).to_le_bytes())?;
            w.write_all(&l.event_idx.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BOUNDARY_MAGIC {
            return Err(Error::Format("not an engine checkpoint".into()));
        }
        let state = NodeState::read_checkpoint(r)?;
        let table = NeighborTable::read_checkpoint(r)?;
        let mut b8 = [0u8; 8];
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8);
        let mut pending = Vec::new();
        for _ in 0..n {
            r.read_exact(&mut b4)?;
            let src = u32::from_le_bytes(b4);
            r.read_exact(&mut b4)?;
            let dst = u32::from_le_bytes(b4);
            r.read_exact(&mut b8)?;
            let ts = i64::from_le_bytes(b8);
            r.read_exact(&mut b4)?;
            let feat = u32::from_le_bytes(b4);
            r.read_exact(&mut b8)?;
            let mut l = TemporalLink::new(src, dst, ts, u64::from_le_bytes(b8));
            if feat != u32::MAX {
                l = l.with_feat(feat);
            }
            pending.push(l);
        }
        Ok(Self {
            state,
            table,
            pending,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_checkpoint(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(&mut BufReader::new(f))
    }
}

/// Scores for one evaluated batch.
#[derive(Debug, Clone, Default)]
pub struct BatchScores {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    /// Per positive: the positive's ranking logit, then its negatives'.
    pub rank_pos: Vec<f64>,
    pub rank_neg: Vec<Vec<f64>>,
    /// Snapshot lookup, embedding and head time for the 1:1 queries.
    pub query_time: Duration,
}

/// Drives the model over a stream batch by batch with the phase order
/// predict, then update.
///
/// Status updates are applied lazily: the events of batch `b` are folded
/// into the status rows at the start of batch `b + 1`, on that batch's
/// tape, so the GRU receives gradients from the next batch's loss. Tables
/// are updated eagerly at the end of each batch. Either way, nothing a
/// batch's predictions read depends on that batch's own events.
pub struct Engine<'s> {
    pub stream: &'s TemporalStream,
    pub model: Model<f32>,
    pub state: NodeState<f32>,
    pub table: NeighborTable,
    pending: Vec<TemporalLink>,
    t0: Timestamp,
}

struct Prepared {
    g: Graph<f32>,
    local: LocalStatus,
    emb: Embedded,
    lookup_and_embed: Duration,
}

impl<'s> Engine<'s> {
    pub fn new(
        stream: &'s TemporalStream,
        model: Model<f32>,
        sampler: SamplerConfig,
    ) -> Result<Self> {
        let t0 = stream.links.first().map_or(0, |l| l.ts);
        let table = NeighborTable::new(stream.num_nodes, sampler)?;
        let state = NodeState::new(stream.num_nodes, model.config().d_status, t0);
        Ok(Self {
            stream,
            model,
            state,
            table,
            pending: Vec::new(),
            t0,
        })
    }

    /// Zero statuses, empty tables, nothing pending.
    pub fn reset(&mut self) {
        self.state.reset(self.t0);
        self.table.clear();
        self.pending.clear();
    }

    pub fn checkpoint(&self) -> EngineCheckpoint {
        EngineCheckpoint {
            state: self.state.clone(),
            table: self.table.clone(),
            pending: self.pending.clone(),
        }
    }

    pub fn restore(&mut self, ck: &EngineCheckpoint) {
        self.state = ck.state.clone();
        self.table = ck.table.clone();
        self.pending = ck.pending.clone();
    }

    pub fn pending(&self) -> &[TemporalLink] {
        &self.pending
    }

    /// Applies pending status updates now (no tape kept).
    pub fn flush(&mut self) -> Result<()> {
        let pending = std::mem::take(&mut self.pending);
        let mut g = Graph::new(false);
        let nodes = pending.iter().flat_map(|l| [l.src, l.dst]);
        let mut local = LocalStatus::gather(&mut g, &self.state, nodes)?;
        self.model.apply_events(
            &mut g,
            &mut local,
            &pending,
            &mut self.state.last_ts,
            &self.stream.features,
        )?;
        local.commit(&g, &mut self.state);
        Ok(())
    }

    fn prepare(&mut self, queries: &[Query], train: bool, rng: &mut impl Rng) -> Result<Prepared> {
        let start = Instant::now();
        let mut snaps: Vec<Vec<SnapshotEntry>> = Vec::with_capacity(queries.len());
        for q in queries {
            snaps.push(self.table.snapshot(q.node)?);
        }
        let mut lookup = start.elapsed();
        let mut nodes: BTreeSet<NodeId> =
            self.pending.iter().flat_map(|l| [l.src, l.dst]).collect();
        nodes.extend(queries.iter().map(|q| q.node));
        nodes.extend(snaps.iter().flatten().map(|e| e.nbr));
        let mut g = Graph::new(train);
        let mut local = LocalStatus::gather(&mut g, &self.state, nodes)?;
        self.model.apply_events(
            &mut g,
            &mut local,
            &self.pending,
            &mut self.state.last_ts,
            &self.stream.features,
        )?;
        let start = Instant::now();
        let refs: Vec<&[SnapshotEntry]> = snaps.iter().map(|s| s.as_slice()).collect();
        let emb = self
            .model
            .embed(&mut g, &local, queries, &refs, &self.stream.features, rng)?;
        lookup += start.elapsed();
        Ok(Prepared {
            g,
            local,
            emb,
            lookup_and_embed: lookup,
        })
    }

    fn finish(&mut self, g: &Graph<f32>, local: &LocalStatus, batch: &[TemporalLink]) {
        local.commit(g, &mut self.state);
        self.table.batch_update(batch);
        self.pending.clear();
        self.pending.extend_from_slice(batch);
    }

    /// One optimizer step on `batch`; `negs` holds `k` negatives per link,
    /// grouped by negative index (`negs[j * batch.len() + i]`).
    /// Returns the mean binary cross-entropy.
    pub fn train_batch(
        &mut self,
        batch: &[TemporalLink],
        negs: &[NodeId],
        opt: &mut Adam<f32>,
        rng: &mut impl Rng,
    ) -> Result<f64> {
        let b = batch.len();
        if b == 0 || negs.is_empty() || !negs.len().is_multiple_of(b) {
            return Err(Error::Invalid(format!(
                "{} negatives for a batch of {b}",
                negs.len()
            )));
        }
        let k = negs.len() / b;
        let mut queries: Vec<Query> = batch
            .iter()
            .map(|l| Query {
                node: l.src,
                t: l.ts,
            })
            .collect();
        queries.extend(batch.iter().map(|l| Query {
            node: l.dst,
            t: l.ts,
        }));
        queries.extend(negs.iter().enumerate().map(|(j, &n)| Query {
            node: n,
            t: batch[j % b].ts,
        }));
        let Prepared {
            mut g, local, emb, ..
        } = self.prepare(&queries, true, rng)?;
        let src_rows: Vec<usize> = (0..(k + 1) * b).map(|j| j % b).collect();
        let dst_rows: Vec<usize> = (b..(k + 2) * b).collect();
        let zu = g.gather_rows(emb.z, &src_rows)?;
        let zv = g.gather_rows(emb.z, &dst_rows)?;
        let logits = self.model.link_logits(&mut g, zu, zv)?;
        let mut targets = vec![1.0f32; b];
        targets.resize((k + 1) * b, 0.0);
        let loss = g.bce_with_logits(logits, &targets)?;
        let value = g.scalar(loss) as f64;
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("training loss {value}")));
        }
        g.backward(loss, self.model.params_mut())?;
        opt.step(self.model.params_mut());
        if !self.model.params().all_finite() {
            return Err(Error::NonFinite("parameters after optimizer step".into()));
        }
        self.finish(&g, &local, batch);
        Ok(value)
    }

    /// Scores `batch` with frozen parameters, then applies it. `negs` has
    /// one negative per link for AUC/AP. `rank_negs[i]`, if given, are
    /// the ranking negatives of link `i`; candidates are embedded once per
    /// batch at the batch's last timestamp.
    pub fn score_batch(
        &mut self,
        batch: &[TemporalLink],
        negs: &[NodeId],
        rank_negs: Option<&[Vec<NodeId>]>,
        rng: &mut impl Rng,
    ) -> Result<BatchScores> {
        let b = batch.len();
        if negs.len() != b {
            return Err(Error::Invalid(format!(
                "{} negatives for a batch of {b}",
                negs.len()
            )));
        }
        if b == 0 {
            return Ok(BatchScores::default());
        }
        let mut queries: Vec<Query> = batch
            .iter()
            .map(|l| Query {
                node: l.src,
                t: l.ts,
            })
            .collect();
        queries.extend(batch.iter().map(|l| Query {
            node: l.dst,
            t: l.ts,
        }));
        queries.extend(
            negs.iter()
                .zip(batch)
                .map(|(&n, l)| Query { node: n, t: l.ts }),
        );
        let mut cands: Vec<NodeId> = Vec::new();
        if let Some(rn) = rank_negs {
            let set: BTreeSet<NodeId> = rn
                .iter()
                .flatten()
                .copied()
                .chain(batch.iter().map(|l| l.dst))
                .collect();
            cands = set.into_iter().collect();
            let t_ref = batch[b - 1].ts;
            queries.extend(cands.iter().map(|&c| Query { node: c, t: t_ref }));
        }
        let Prepared {
            mut g,
            local,
            emb,
            lookup_and_embed,
        } = self.prepare(&queries, false, rng)?;
        let start = Instant::now();
        let src_rows: Vec<usize> = (0..2 * b).map(|j| j % b).collect();
        let dst_rows: Vec<usize> = (b..3 * b).collect();
        let zu = g.gather_rows(emb.z, &src_rows)?;
        let zv = g.gather_rows(emb.z, &dst_rows)?;
        let logits = self.model.link_logits(&mut g, zu, zv)?;
        let probs = g.sigmoid(logits);
        let p = &g.value(probs).data;
        let query_time = lookup_and_embed + start.elapsed();
        let mut out = BatchScores {
            pos: p[..b].iter().map(|&x| x as f64).collect(),
            neg: p[b..].iter().map(|&x| x as f64).collect(),
            query_time,
            ..Default::default()
        };
        if let Some(rn) = rank_negs {
            if rn.len() != b {
                return Err(Error::Invalid(format!(
                    "{} ranking lists for a batch of {b}",
                    rn.len()
                )));
            }
            let z = g.value(emb.z);
            let d = z.cols;
            let zsrc = Tensor::new(b, d, z.data[..b * d].to_vec())?;
            let zc = Tensor::new(cands.len(), d, z.data[3 * b * d..].to_vec())?;
            let (pu, pv) = self.model.link_projections(&zsrc, &zc);
            let row = |n: NodeId| cands.binary_search(&n).expect("candidate embedded");
            for (i, l) in batch.iter().enumerate() {
                let score = |n: NodeId| {
                    self.model
                        .link_logit_from_projections(pu.row(i), pv.row(row(n)))
                        as f64
                };
                out.rank_pos.push(score(l.dst));
                out.rank_neg.push(rn[i].iter().map(|&n| score(n)).collect());
            }
        }
        self.finish(&g, &local, batch);
        Ok(out)
    }

    /// Embeds `queries` against the pre-batch state, then applies `batch`.
    pub fn embed_then_apply(
        &mut self,
        batch: &[TemporalLink],
        queries: &[Query],
    ) -> Result<Vec<Vec<f32>>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let Prepared { g, local, emb, .. } = self.prepare(queries, false, &mut rng)?;
        let z = g.value(emb.z);
        let out = (0..z.rows).map(|r| z.row(r).to_vec()).collect();
        self.finish(&g, &local, batch);
        Ok(out)
    }

    /// Applies `batch` without any queries.
    pub fn replay_batch(&mut self, batch: &[TemporalLink]) -> Result<()> {
        self.embed_then_apply(batch, &[]).map(|_| ())
    }
}
