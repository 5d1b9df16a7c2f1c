//! The encoder: Fourier time encoding, per-node GRU status, attention over
//! forward-sampled neighbors, and the link / node heads.
//!
//! Everything that carries gradients runs on an [`autodiff::Graph`]. The
//! batched entry points ([`Model::embed`], [`Model::apply_events`]) are what
//! training uses; [`Model::embed_one`], [`Model::process_event`],
//! [`Model::predict_link`] and [`Model::predict_node`] wrap them for single
//! queries.

mod state;

pub use state::{LocalStatus, NodeState};

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamId, ParamStore, Real, Segments, Tensor, Var};
use crate::sampler::{KeyScheme, SamplerConfig, SnapshotEntry};
use crate::stream::{EdgeFeatureStore, NodeId, TemporalLink, Timestamp};
use crate::{Error, Result};

/// Encoder dimensions, fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width of a node status row.
    pub d_status: usize,
    /// Number of time frequencies; the encoding has `2 * d_time` features.
    pub d_time: usize,
    /// Width of an embedding `Z`.
    pub d_out: usize,
    pub heads: usize,
    pub edge_dim: usize,
    pub num_classes: usize,
    /// Dropout on the outer MLP's hidden layer, training tapes only.
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_status: 64,
            d_time: 64,
            d_out: 64,
            heads: 2,
            edge_dim: 0,
            num_classes: 2,
            dropout: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn with_dims(d: usize) -> Self {
        Self {
            d_status: d,
            d_time: d,
            d_out: d,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_status == 0 || self.d_time == 0 || self.d_out == 0 || self.heads == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} not in [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    fn time_width(&self) -> usize {
        2 * self.d_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Ids {
    omega: ParamId,
    gru_w: [ParamId; 3],
    gru_u: [ParamId; 3],
    gru_b: [ParamId; 3],
    msg_w: ParamId,
    msg_b: ParamId,
    att_w: ParamId,
    out_w1: ParamId,
    out_b1: ParamId,
    out_w2: ParamId,
    out_b2: ParamId,
    link_w1: ParamId,
    link_b1: ParamId,
    link_w2: ParamId,
    link_b2: ParamId,
    node_w1: ParamId,
    node_b1: ParamId,
    node_w2: ParamId,
    node_b2: ParamId,
}

impl Ids {
    fn lookup<F: Real>(store: &ParamStore<F>) -> Result<Self> {
        let id = |n: &str| {
            store
                .id(n)
                .ok_or_else(|| Error::Format(format!("missing parameter {n}")))
        };
        Ok(Self {
            omega: id("time.log_omega")?,
            gru_w: [id("gru.wz")?, id("gru.wr")?, id("gru.wn")?],
            gru_u: [id("gru.uz")?, id("gru.ur")?, id("gru.un")?],
            gru_b: [id("gru.bz")?, id("gru.br")?, id("gru.bn")?],
            msg_w: id("msg.w")?,
            msg_b: id("msg.b")?,
            att_w: id("att.w")?,
            out_w1: id("out.w1")?,
            out_b1: id("out.b1")?,
            out_w2: id("out.w2")?,
            out_b2: id("out.b2")?,
            link_w1: id("link.w1")?,
            link_b1: id("link.b1")?,
            link_w2: id("link.w2")?,
            link_b2: id("link.b2")?,
            node_w1: id("node.w1")?,
            node_b1: id("node.b1")?,
            node_w2: id("node.w2")?,
            node_b2: id("node.b2")?,
        })
    }
}

/// One embedding request: node `node` as seen at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub node: NodeId,
    pub t: Timestamp,
}

/// Output of [`Model::embed`].
#[derive(Debug, Clone)]
pub struct Embedded {
    /// `Q x d_out`.
    pub z: Var,
    /// `M x heads` attention weights over all snapshot rows, if any.
    pub attention: Option<Var>,
    pub segments: Segments,
}

/// `[cos(w_1 dt), sin(w_1 dt), ..., cos(w_d dt), sin(w_d dt)]`.
pub fn t_encode<F: Real>(dt: F, omega: &[F]) -> Vec<F> {
    omega
        .iter()
        .flat_map(|&w| [(w * dt).cos(), (w * dt).sin()])
        .collect()
}

/// Frequencies geometrically spaced from 1 down to 1e-5.
pub fn default_frequencies<F: Real>(d: usize) -> Vec<F> {
    if d == 1 {
        return vec![F::one()];
    }
    (0..d)
        .map(|i| F::lit(10f64.powf(-5.0 * i as f64 / (d - 1) as f64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    cfg: ModelConfig,
    store: ParamStore<F>,
    ids: Ids,
}

impl<F: Real> Model<F> {
    /// Glorot-uniform weights, zero biases, geometric frequencies.
    pub fn new(cfg: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let (ds, dt, de, dout) = (cfg.d_status, cfg.time_width(), cfg.edge_dim, cfg.d_out);
        let mut s = ParamStore::new();
        let log_freqs = default_frequencies::<F>(cfg.d_time)
            .into_iter()
            .map(|w| w.ln())
            .collect();
        s.add("time.log_omega", Tensor::row_vector(log_freqs));
        let gru_in = ds + dt + de;
        for g in ["z", "r", "n"] {
            s.add_glorot(&format!("gru.w{g}"), gru_in, ds, rng);
        }
        for g in ["z", "r", "n"] {
            s.add_glorot(&format!("gru.u{g}"), ds, ds, rng);
        }
        for g in ["z", "r", "n"] {
            s.add_zeros(&format!("gru.b{g}"), 1, ds);
        }
        s.add_glorot("msg.w", ds + de + dt, ds, rng);
        s.add_zeros("msg.b", 1, ds);
        s.add_glorot("att.w", ds, cfg.heads, rng);
        s.add_glorot("out.w1", ds + cfg.heads * ds, dout, rng);
        s.add_zeros("out.b1", 1, dout);
        s.add_glorot("out.w2", dout, dout, rng);
        s.add_zeros("out.b2", 1, dout);
        s.add_glorot("link.w1", 2 * dout, dout, rng);
        s.add_zeros("link.b1", 1, dout);
        s.add_glorot("link.w2", dout, 1, rng);
        s.add_zeros("link.b2", 1, 1);
        s.add_glorot("node.w1", dout, dout, rng);
        s.add_zeros("node.b1", 1, dout);
        s.add_glorot("node.w2", dout, cfg.num_classes, rng);
        s.add_zeros("node.b2", 1, cfg.num_classes);
        let ids = Ids::lookup(&s)?;
        Ok(Self { cfg, store: s, ids })
    }

    /// Wraps an existing parameter store (e.g. one read from a checkpoint),
    /// checking that every parameter is present with the expected shape.
    pub fn from_store(cfg: ModelConfig, store: ParamStore<F>) -> Result<Self> {
        cfg.validate()?;
        let ids = Ids::lookup(&store)?;
        let reference = Model::<F>::new(cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0))?;
        for id in reference.store.ids() {
            let name = reference.store.name(id);
            let theirs = store.id(name).map(|i| store.value(i).shape());
            if theirs != Some(reference.store.value(id).shape()) {
                return Err(Error::Format(format!(
                    "parameter {name} has shape {theirs:?}"
                )));
            }
        }
        Ok(Self { cfg, store, ids })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.store
    }

    /// Sets every parameter (frequencies included) to zero.
    pub fn zero_weights(&mut self) {
        let ids: Vec<_> = self.store.ids().collect();
        for id in ids {
            self.store
                .value_mut(id)
                .data
                .iter_mut()
                .for_each(|v| *v = F::zero());
        }
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model {
            cfg: self.cfg,
            store: self.store.cast(),
            ids: self.ids,
        }
    }

    fn p(&self, g: &mut Graph<F>, id: ParamId) -> Var {
        g.param(&self.store, id)
    }

    fn dense(&self, g: &mut Graph<F>, x: Var, w: ParamId, b: ParamId) -> Result<Var> {
        let (w, b) = (self.p(g, w), self.p(g, b));
        let h = g.matmul(x, w)?;
        g.add_row(h, b)
    }

    /// Current time-encoding frequencies (learned in log space).
    pub fn frequencies(&self) -> Vec<F> {
        self.store
            .value(self.ids.omega)
            .data
            .iter()
            .map(|w| w.exp())
            .collect()
    }

    /// Time encoding of a column of deltas, `M x 2 d_time`.
    pub fn t_encode_tape(&self, g: &mut Graph<F>, dts: Vec<F>) -> Result<Var> {
        let col = g.constant(Tensor::column(dts));
        let log_omega = self.p(g, self.ids.omega);
        let omega = g.exp(log_omega);
        let phase = g.matmul(col, omega)?;
        let (c, s) = (g.cos(phase), g.sin(phase));
        g.interleave(c, s)
    }

    fn edge_rows(
        &self,
        g: &mut Graph<F>,
        feats: &EdgeFeatureStore,
        rows: impl Iterator<Item = Option<u32>>,
    ) -> Result<Option<Var>> {
        let de = self.cfg.edge_dim;
        if de == 0 {
            return Ok(None);
        }
        if feats.dim() != de {
            return Err(Error::Config(format!(
                "edge features have dim {}, model expects {de}",
                feats.dim()
            )));
        }
        let mut data = Vec::new();
        let mut n = 0;
        for r in rows {
            match r {
                Some(r) => data.extend(
                    feats
                        .row(r)
                        .iter()
                        .map(|&x| F::from_f32(x).unwrap_or_else(F::zero)),
                ),
                None => data.extend(std::iter::repeat_n(F::zero(), de)),
            }
            n += 1;
        }
        Ok(Some(g.constant(Tensor::new(n, de, data)?)))
    }

    fn concat(g: &mut Graph<F>, parts: &[Option<Var>]) -> Result<Var> {
        let parts: Vec<Var> = parts.iter().flatten().copied().collect();
        if parts.len() == 1 {
            Ok(parts[0])
        } else {
            g.concat_cols(&parts)
        }
    }

    /// GRU step: `h` is the node's own status, `x` the event input.
    fn gru(&self, g: &mut Graph<F>, h: Var, x: Var) -> Result<Var> {
        let [wz, wr, wn] = self.ids.gru_w;
        let [uz, ur, un] = self.ids.gru_u;
        let [bz, br, bn] = self.ids.gru_b;
        let gate = |g: &mut Graph<F>, w, u, b, h: Var| -> Result<Var> {
            let a = self.dense(g, x, w, b)?;
            let u = self.p(g, u);
            let hu = g.matmul(h, u)?;
            g.add(a, hu)
        };
        let z = gate(g, wz, uz, bz, h)?;
        let z = g.sigmoid(z);
        let r = gate(g, wr, ur, br, h)?;
        let r = g.sigmoid(r);
        let rh = g.mul(r, h)?;
        let n = gate(g, wn, un, bn, rh)?;
        let n = g.tanh(n);
        // h' = (1 - z) n + z h = n + z (h - n)
        let d = g.sub(h, n)?;
        let zd = g.mul(z, d)?;
        g.add(n, zd)
    }

    /// Applies `events` in order to the statuses held in `local`, which
    /// must contain every endpoint. Both endpoints of an event read the
    /// pre-event statuses. Events are grouped into waves in which no node
    /// repeats, so each wave is one batched GRU call; the result equals
    /// one-at-a-time processing. `last_ts` is indexed by global node id
    /// and advanced to each event's time.
    pub fn apply_events(
        &self,
        g: &mut Graph<F>,
        local: &mut LocalStatus,
        events: &[TemporalLink],
        last_ts: &mut [Timestamp],
        feats: &EdgeFeatureStore,
    ) -> Result<()> {
        if events.is_empty() {
            return Ok(());
        }
        let mut wave_of: HashMap<NodeId, usize> = HashMap::new();
        let mut waves: Vec<Vec<&TemporalLink>> = Vec::new();
        for l in events {
            let w = wave_of
                .get(&l.src)
                .max(wave_of.get(&l.dst))
                .map_or(0, |w| w + 1);
            wave_of.insert(l.src, w);
            wave_of.insert(l.dst, w);
            if waves.len() <= w {
                waves.push(Vec::new());
            }
            waves[w].push(l);
        }
        for wave in waves {
            let mut own = Vec::new();
            let mut partner = Vec::new();
            let mut dts = Vec::new();
            let mut feat_rows = Vec::new();
            let mut touched = Vec::new();
            for l in &wave {
                let ends: &[(NodeId, NodeId)] = if l.is_self_loop() {
                    &[(l.src, l.dst)]
                } else {
                    &[(l.src, l.dst), (l.dst, l.src)]
                };
                for &(u, v) in ends {
                    own.push(local.row(u)?);
                    partner.push(local.row(v)?);
                    let prev = last_ts.get(u as usize).copied().ok_or(Error::UnknownNode {
                        node: u as u64,
                        num_nodes: last_ts.len(),
                    })?;
                    dts.push(F::from_i64(l.ts - prev).unwrap_or_else(F::zero));
                    feat_rows.push(l.edge_feat);
                    touched.push(u);
                }
            }
            for (u, l) in touched.iter().zip(wave.iter().flat_map(|l| {
                let n = if l.is_self_loop() { 1 } else { 2 };
                std::iter::repeat_n(l.ts, n)
            })) {
                last_ts[*u as usize] = l;
            }
            let h = g.gather_rows(local.var, &own)?;
            let p = g.gather_rows(local.var, &partner)?;
            let te = self.t_encode_tape(g, dts)?;
            let e = self.edge_rows(g, feats, feat_rows.into_iter())?;
            let x = Self::concat(g, &[Some(p), Some(te), e])?;
            let h2 = self.gru(g, h, x)?;
            local.var = g.scatter_rows(local.var, &own, h2)?;
        }
        Ok(())
    }

    /// Embeddings for `queries`, where `snapshots[i]` is the forward-table
    /// snapshot of `queries[i].node` (slot order) and `local` holds the
    /// statuses of every query node and every snapshot neighbor.
    pub fn embed(
        &self,
        g: &mut Graph<F>,
        local: &LocalStatus,
        queries: &[Query],
        snapshots: &[&[SnapshotEntry]],
        feats: &EdgeFeatureStore,
        rng: &mut impl Rng,
    ) -> Result<Embedded> {
        if queries.len() != snapshots.len() {
            return Err(Error::Invalid(format!(
                "{} queries but {} snapshots",
                queries.len(),
                snapshots.len()
            )));
        }
        let ds = self.cfg.d_status;
        let own_idx = queries
            .iter()
            .map(|q| local.row(q.node))
            .collect::<Result<Vec<_>>>()?;
        let own = g.gather_rows(local.var, &own_idx)?;
        let segments = Segments::from_lengths(snapshots.iter().map(|s| s.len()));
        let (agg, attention) = if segments.total() == 0 {
            (
                g.constant(Tensor::zeros(queries.len(), self.cfg.heads * ds)),
                None,
            )
        } else {
            let mut nb_idx = Vec::with_capacity(segments.total());
            let mut dts = Vec::with_capacity(segments.total());
            for (q, snap) in queries.iter().zip(snapshots) {
                for e in snap.iter() {
                    nb_idx.push(local.row(e.nbr)?);
                    dts.push(F::from_i64(q.t - e.ts).unwrap_or_else(F::zero));
                }
            }
            let nb = g.gather_rows(local.var, &nb_idx)?;
            let e = self.edge_rows(
                g,
                feats,
                snapshots.iter().flat_map(|s| s.iter().map(|e| e.edge_feat)),
            )?;
            let te = self.t_encode_tape(g, dts)?;
            let x = Self::concat(g, &[Some(nb), e, Some(te)])?;
            let msg = self.dense(g, x, self.ids.msg_w, self.ids.msg_b)?;
            let msg = g.relu(msg);
            let w = self.p(g, self.ids.att_w);
            let logits = g.matmul(msg, w)?;
            let att = g.segment_softmax(logits, &segments)?;
            (g.segment_weighted_sum(msg, att, &segments)?, Some(att))
        };
        let x = g.concat_cols(&[own, agg])?;
        let h = self.dense(g, x, self.ids.out_w1, self.ids.out_b1)?;
        let h = g.relu(h);
        let h = g.dropout(h, self.cfg.dropout, rng);
        let z = self.dense(g, h, self.ids.out_w2, self.ids.out_b2)?;
        if !g.value(z).is_finite() {
            return Err(Error::NonFinite("embedding".into()));
        }
        Ok(Embedded {
            z,
            attention,
            segments,
        })
    }

    /// Link logits for row pairs of `zu` and `zv`, `Q x 1`.
    pub fn link_logits(&self, g: &mut Graph<F>, zu: Var, zv: Var) -> Result<Var> {
        let x = g.concat_cols(&[zu, zv])?;
        let h = self.dense(g, x, self.ids.link_w1, self.ids.link_b1)?;
        let h = g.relu(h);
        self.dense(g, h, self.ids.link_w2, self.ids.link_b2)
    }

    /// Class logits, `Q x num_classes`.
    pub fn node_logits(&self, g: &mut Graph<F>, z: Var) -> Result<Var> {
        let h = self.dense(g, z, self.ids.node_w1, self.ids.node_b1)?;
        let h = g.relu(h);
        self.dense(g, h, self.ids.node_w2, self.ids.node_b2)
    }

    /// Splits the link head's first layer so that scores for many
    /// `(u, v)` pairs cost one small dot product each: returns
    /// `zu W1[..d]` for the sources and `zv W1[d..] + b1` for the targets.
    pub fn link_projections(&self, zu: &Tensor<F>, zv: &Tensor<F>) -> (Tensor<F>, Tensor<F>) {
        let d = self.cfg.d_out;
        let w1 = self.store.value(self.ids.link_w1);
        let proj = |z: &Tensor<F>, off: usize| {
            let mut out = Tensor::zeros(z.rows, d);
            F::gemm(
                z.rows,
                d,
                d,
                F::one(),
                &z.data,
                d as isize,
                1,
                &w1.data[off * d..],
                d as isize,
                1,
                F::zero(),
                &mut out.data,
                d as isize,
                1,
            );
            out
        };
        let pu = proj(zu, 0);
        let mut pv = proj(zv, d);
        let b1 = &self.store.value(self.ids.link_b1).data;
        for r in 0..pv.rows {
            pv.row_mut(r)
                .iter_mut()
                .zip(b1)
                .for_each(|(x, &b)| *x = *x + b);
        }
        (pu, pv)
    }

    /// Link logit from two rows of [`Model::link_projections`].
    pub fn link_logit_from_projections(&self, pu: &[F], pv: &[F]) -> F {
        let w2 = &self.store.value(self.ids.link_w2).data;
        let b2 = self.store.value(self.ids.link_b2).data[0];
        pu.iter()
            .zip(pv)
            .zip(w2)
            .fold(b2, |acc, ((&a, &b), &w)| acc + (a + b).max(F::zero()) * w)
    }

    /// Single-query embedding against the full state.
    pub fn embed_one(
        &self,
        u: NodeId,
        t: Timestamp,
        snapshot: &[SnapshotEntry],
        state: &NodeState<F>,
        feats: &EdgeFeatureStore,
    ) -> Result<Vec<F>> {
        let mut g = Graph::new(false);
        let nodes = std::iter::once(u).chain(snapshot.iter().map(|e| e.nbr));
        let local = LocalStatus::gather(&mut g, state, nodes)?;
        let out = self.embed(
            &mut g,
            &local,
            &[Query { node: u, t }],
            &[snapshot],
            feats,
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(0),
        )?;
        Ok(g.value(out.z).data.clone())
    }

    /// Updates both endpoints' status rows (and last-event times) for one event.
    pub fn process_event(
        &self,
        link: &TemporalLink,
        state: &mut NodeState<F>,
        feats: &EdgeFeatureStore,
    ) -> Result<()> {
        let mut g = Graph::new(false);
        let mut local = LocalStatus::gather(&mut g, state, [link.src, link.dst])?;
        self.apply_events(
            &mut g,
            &mut local,
            std::slice::from_ref(link),
            &mut state.last_ts,
            feats,
        )?;
        local.commit(&g, state);
        Ok(())
    }

    /// Probability that a link `(u, v)` occurs, from their embeddings.
    pub fn predict_link(&self, zu: &[F], zv: &[F]) -> Result<F> {
        let mut g = Graph::new(false);
        let a = g.constant(Tensor::row_vector(zu.to_vec()));
        let b = g.constant(Tensor::row_vector(zv.to_vec()));
        let l = self.link_logits(&mut g, a, b)?;
        let p = g.sigmoid(l);
        Ok(g.scalar(p))
    }

    /// Class logits for one embedding.
    pub fn predict_node(&self, z: &[F]) -> Result<Vec<F>> {
        let mut g = Graph::new(false);
        let a = g.constant(Tensor::row_vector(z.to_vec()));
        let l = self.node_logits(&mut g, a)?;
        Ok(g.value(l).data.clone())
    }

    /// Checkpoint: `"NLBMODL1" | u64 d_status, d_time, d_out, heads, edge_dim, num_classes
    /// | f64 dropout | u8 scheme | u64 s | f64 alpha | u64 q1, q2, seed | param blob`.
    pub fn write_checkpoint(&self, sampler: &SamplerConfig, w: &mut impl Write) -> Result<()> {
        let c = &self.cfg;
        let mut buf = Vec::with_capacity(128);
        buf.extend_from_slice(MODEL_MAGIC);
        for v in [
            c.d_status,
            c.d_time,
            c.d_out,
            c.heads,
            c.edge_dim,
            c.num_classes,
        ] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        buf.extend_from_slice(&c.dropout.to_le_bytes());
        buf.push(sampler.scheme.code());
        buf.extend_from_slice(&(sampler.slots as u64).to_le_bytes());
        buf.extend_from_slice(&sampler.alpha.to_le_bytes());
        for v in [sampler.q1, sampler.q2, sampler.seed] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        self.store.write_blob(w)
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<(Self, SamplerConfig)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format("not a model checkpoint".into()));
        }
        let mut u = || -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let dims: Vec<usize> = (0..6)
            .map(|_| u().map(|v| v as usize))
            .collect::<Result<_>>()?;
        let dropout = f64::from_bits(u()?);
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let scheme = KeyScheme::from_code(code[0])?;
        let mut u = || -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let slots = u()? as usize;
        let alpha = f64::from_bits(u()?);
        let (q1, q2, seed) = (u()?, u()?, u()?);
        let cfg = ModelConfig {
            d_status: dims[0],
            d_time: dims[1],
            d_out: dims[2],
            heads: dims[3],
            edge_dim: dims[4],
            num_classes: dims[5],
            dropout,
        };
        let sampler = SamplerConfig {
            scheme,
            slots,
            alpha,
            q1,
            q2,
            seed,
        };
        let store = ParamStore::read_blob(r)?;
        Ok((Self::from_store(cfg, store)?, sampler))
    }

    pub fn save(&self, sampler: &SamplerConfig, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_checkpoint(sampler, &mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, SamplerConfig)> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(&mut std::io::BufReader::new(f))
    }
}

const MODEL_MAGIC: &[u8; 8] = b"NLBMODL1";
