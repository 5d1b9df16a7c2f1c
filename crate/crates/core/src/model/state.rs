use std::collections::HashMap;
use std::io::{Read, Write};

use crate::autodiff::{Graph, Real, Tensor, Var};
use crate::stream::{NodeId, Timestamp};
use crate::{Error, Result};

/// Per-node status rows `r_u` and last-event times.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState<F> {
    pub r: Tensor<F>,
    pub last_ts: Vec<Timestamp>,
}

impl<F: Real> NodeState<F> {
    /// Zero statuses; every node's last event time starts at `t0`.
    pub fn new(num_nodes: usize, d_status: usize, t0: Timestamp) -> Self {
        Self {
            r: Tensor::zeros(num_nodes, d_status),
            last_ts: vec![t0; num_nodes],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.r.rows
    }

    pub fn reset(&mut self, t0: Timestamp) {
        self.r.data.iter_mut().for_each(|v| *v = F::zero());
        self.last_ts.iter_mut().for_each(|t| *t = t0);
    }

    pub fn row(&self, u: NodeId) -> &[F] {
        self.r.row(u as usize)
    }

    /// `"NLBSTAT1" | u64 nodes | u64 d | u8 width | i64 last_ts[nodes] | rows`.
    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        let mut buf =
            Vec::with_capacity(25 + self.last_ts.len() * 8 + self.r.len() * F::WIDTH as usize);
        buf.extend_from_slice(STATE_MAGIC);
        buf.extend_from_slice(&(self.r.rows as u64).to_le_bytes());
        buf.extend_from_slice(&(self.r.cols as u64).to_le_bytes());
        buf.push(F::WIDTH);
        for t in &self.last_ts {
            buf.extend_from_slice(&t.to_le_bytes());
        }
        for &v in &self.r.data {
            v.to_le(&mut buf);
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<Self> {
        let mut head = [0u8; 25];
        r.read_exact(&mut head)?;
        if &head[..8] != STATE_MAGIC {
            return Err(Error::Format("not a state checkpoint".into()));
        }
        let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let d = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
        if head[24] != F::WIDTH {
            return Err(Error::Format(format!(
                "state has {}-byte scalars, expected {}",
                head[24],
                F::WIDTH
            )));
        }
        let mut ts = vec![0u8; n * 8];
        r.read_exact(&mut ts)?;
        let last_ts = ts
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let w = F::WIDTH as usize;
        let mut raw = vec![0u8; n * d * w];
        r.read_exact(&mut raw)?;
        let data = raw.chunks_exact(w).map(F::from_le).collect();
        Ok(Self {
            r: Tensor::new(n, d, data)?,
            last_ts,
        })
    }
}

const STATE_MAGIC: &[u8; 8] = b"NLBSTAT1";

/// The status rows of a subset of nodes, recorded on a tape as one matrix.
#[derive(Debug, Clone)]
pub struct LocalStatus {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    pub var: Var,
}

impl LocalStatus {
    /// Copies the rows of `nodes` (deduplicated, ascending) from `state`
    /// onto `g` as a constant.
    pub fn gather<F: Real>(
        g: &mut Graph<F>,
        state: &NodeState<F>,
        nodes: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self> {
        let mut nodes: Vec<NodeId> = nodes.into_iter().collect();
        nodes.sort_unstable();
        nodes.dedup();
        if let Some(&bad) = nodes.iter().find(|&&u| u as usize >= state.num_nodes()) {
            return Err(Error::UnknownNode {
                node: bad as u64,
                num_nodes: state.num_nodes(),
            });
        }
        let d = state.r.cols;
        let mut data = Vec::with_capacity(nodes.len() * d);
        for &u in &nodes {
            data.extend_from_slice(state.row(u));
        }
        let var = g.constant(Tensor::new(nodes.len(), d, data)?);
        Ok(Self::from_var(nodes, var))
    }

    /// Wraps a tape matrix whose row `i` is the status of `nodes[i]`.
    pub fn from_var(nodes: Vec<NodeId>, var: Var) -> Self {
        let index = nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        Self { nodes, index, var }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn row(&self, u: NodeId) -> Result<usize> {
        self.index.get(&u).copied().ok_or(Error::UnknownNode {
            node: u as u64,
            num_nodes: self.nodes.len(),
        })
    }

    /// Writes the current tape values back into `state`.
    pub fn commit<F: Real>(&self, g: &Graph<F>, state: &mut NodeState<F>) {
        let t = g.value(self.var);
        for (i, &u) in self.nodes.iter().enumerate() {
            state.r.row_mut(u as usize).copy_from_slice(t.row(i));
        }
    }
}
