use rand::SeedableRng;

use crate::autodiff::{Graph, Real, Tensor, Var};
use crate::model::{LocalStatus, Model, Query};
use crate::sampler::{NeighborTable, SamplerConfig, SnapshotEntry};
use crate::stream::{NodeId, TemporalStream};
use crate::{Error, Result};

/// Mean per-batch loss over a whole stream on a single tape, with status
/// rows chained across batches (no truncation of the recurrence).
///
/// Each batch scores `(src, dst)` against `(src, negatives[i])` with binary
/// cross-entropy; if `node_labels` is given, a cross-entropy term on the
/// sources' class logits is added. Dropout is inactive. Intended for
/// gradient checks on small streams.
pub fn unrolled_loss<F: Real>(
    model: &Model<F>,
    g: &mut Graph<F>,
    stream: &TemporalStream,
    sampler: SamplerConfig,
    batch_size: usize,
    negatives: &[NodeId],
    node_labels: Option<&[usize]>,
) -> Result<Var> {
    if negatives.len() != stream.len() || node_labels.is_some_and(|l| l.len() != stream.len()) {
        return Err(Error::Invalid(
            "negatives and labels must align with links".into(),
        ));
    }
    if batch_size == 0 || stream.is_empty() {
        return Err(Error::Invalid(
            "need a non-empty stream and batch size".into(),
        ));
    }
    let n = stream.num_nodes;
    let mut table = NeighborTable::new(n, sampler)?;
    let mut last_ts = vec![stream.links[0].ts; n];
    let zeros = g.constant(Tensor::zeros(n, model.config().d_status));
    let mut local = LocalStatus::from_var((0..n as NodeId).collect(), zeros);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut pending: &[_] = &[];
    let mut total: Option<Var> = None;
    let mut batches = 0;
    for (bi, batch) in stream.links.chunks(batch_size).enumerate() {
        model.apply_events(g, &mut local, pending, &mut last_ts, &stream.features)?;
        let b = batch.len();
        let negs = &negatives[bi * batch_size..bi * batch_size + b];
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
                .map(|(&v, l)| Query { node: v, t: l.ts }),
        );
        let snaps = queries
            .iter()
            .map(|q| table.snapshot(q.node))
            .collect::<Result<Vec<Vec<SnapshotEntry>>>>()?;
        let refs: Vec<&[SnapshotEntry]> = snaps.iter().map(|s| s.as_slice()).collect();
        let emb = model.embed(g, &local, &queries, &refs, &stream.features, &mut rng)?;
        let src_rows: Vec<usize> = (0..2 * b).map(|j| j % b).collect();
        let dst_rows: Vec<usize> = (b..3 * b).collect();
        let zu = g.gather_rows(emb.z, &src_rows)?;
        let zv = g.gather_rows(emb.z, &dst_rows)?;
        let logits = model.link_logits(g, zu, zv)?;
        let mut targets = vec![F::one(); b];
        targets.resize(2 * b, F::zero());
        let mut loss = g.bce_with_logits(logits, &targets)?;
        if let Some(labels) = node_labels {
            let zs = g.gather_rows(emb.z, &(0..b).collect::<Vec<_>>())?;
            let cl = model.node_logits(g, zs)?;
            let ce = g.softmax_cross_entropy(cl, &labels[bi * batch_size..bi * batch_size + b])?;
            loss = g.add(loss, ce)?;
        }
        total = Some(match total {
            Some(t) => g.add(t, loss)?,
            None => loss,
        });
        batches += 1;
        table.batch_update(batch);
        pending = batch;
    }
    let total = total.expect("at least one batch");
    Ok(g.affine(total, F::one() / F::lit(batches as f64), F::zero()))
}
