//! Timestamped link streams: ingestion, binary cache, chronological
//! splits, inductive masking and label-to-link assignment.

mod cache;
mod ingest;
mod labels;
mod split;

pub use cache::{read_cache, write_cache};
pub use ingest::{ingest_csv, read_id_map, write_csv, write_id_map, CsvSchema, IdMap};
pub use labels::{assign_labels_to_links, LabelAssignment, LabelSide, LabeledLink};
pub use split::{chronological_split, inductive_mask, SplitView, DEFAULT_RATIOS};

use std::collections::BTreeSet;

/// Dense node identifier in `0..num_nodes`.
pub type NodeId = u32;
/// Integer timestamp in dataset units.
pub type Timestamp = i64;

/// One interaction event `(src, dst, ts)` in a chronological stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TemporalLink {
    pub src: NodeId,
    pub dst: NodeId,
    pub ts: Timestamp,
    /// Row in the stream's [`EdgeFeatureStore`], if the dataset has features.
    pub edge_feat: Option<u32>,
    pub event_idx: u64,
}

impl TemporalLink {
    pub fn new(src: NodeId, dst: NodeId, ts: Timestamp, event_idx: u64) -> Self {
        Self {
            src,
            dst,
            ts,
            edge_feat: None,
            event_idx,
        }
    }

    pub fn with_feat(mut self, row: u32) -> Self {
        self.edge_feat = Some(row);
        self
    }

    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }
}

/// Dense per-link feature rows. `dim == 0` means the dataset is featureless.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeFeatureStore {
    dim: usize,
    data: Vec<f32>,
}

impl EdgeFeatureStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, data: Vec<f32>) -> crate::Result<Self> {
        if dim == 0 && !data.is_empty() || dim > 0 && !data.len().is_multiple_of(dim) {
            return Err(crate::Error::Invalid(format!(
                "feature buffer of length {} is not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends a row and returns its index.
    pub fn push(&mut self, row: &[f32]) -> u32 {
        assert_eq!(row.len(), self.dim, "feature row width");
        let idx = self.len() as u32;
        self.data.extend_from_slice(row);
        idx
    }

    pub fn row(&self, idx: u32) -> &[f32] {
        let start = idx as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// A node label observed at time `ts`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeLabelEvent {
    pub node: NodeId,
    pub ts: Timestamp,
    pub label: u32,
}

/// An ingested stream plus the global data it owns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemporalStream {
    pub links: Vec<TemporalLink>,
    pub features: EdgeFeatureStore,
    /// Raw per-row label column, aligned with `links`.
    pub row_labels: Vec<Option<u32>>,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub id_map: IdMap,
}

impl TemporalStream {
    /// Builds a featureless, label-free stream from `(src, dst, ts)` triples
    /// whose ids are already dense.
    pub fn from_triples(triples: &[(NodeId, NodeId, Timestamp)]) -> crate::Result<Self> {
        let mut links = Vec::with_capacity(triples.len());
        let mut prev = Timestamp::MIN;
        let mut num_nodes = 0usize;
        for (i, &(src, dst, ts)) in triples.iter().enumerate() {
            if ts < prev {
                return Err(crate::Error::DecreasingTimestamp {
                    line: i as u64 + 1,
                    ts,
                    prev,
                });
            }
            prev = ts;
            num_nodes = num_nodes.max(src.max(dst) as usize + 1);
            links.push(TemporalLink::new(src, dst, ts, i as u64));
        }
        Ok(Self {
            row_labels: vec![None; links.len()],
            links,
            features: EdgeFeatureStore::new(0),
            num_nodes,
            num_classes: 0,
            id_map: IdMap::identity(num_nodes),
        })
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Label events derived from the label column. Each row's label is
    /// attributed to the row's source node at the row's timestamp.
    pub fn label_events(&self) -> Vec<NodeLabelEvent> {
        self.links
            .iter()
            .zip(&self.row_labels)
            .filter_map(|(l, lab)| {
                lab.map(|label| NodeLabelEvent {
                    node: l.src,
                    ts: l.ts,
                    label,
                })
            })
            .collect()
    }

    pub fn nodes_in(links: &[TemporalLink]) -> BTreeSet<NodeId> {
        links.iter().flat_map(|l| [l.src, l.dst]).collect()
    }

    /// Git-style content hash (`sha256("blob <len>\0" ++ bytes)`) of the
    /// binary cache encoding; stable across re-ingestion.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut buf = Vec::new();
        cache::encode(self, &mut buf).expect("in-memory encode");
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", buf.len()).as_bytes());
        h.update(&buf);
        h.finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    }
}
