//! Backward samplers over the full stored history.
//!
//! Each query first backtracks over the node's history to collect the
//! candidates with `ts < t`, then samples among them, so the cost of a
//! query is linear in the node's history length.

use rand::Rng;

use crate::stream::{NodeId, TemporalLink, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistEntry {
    pub nbr: NodeId,
    pub ts: Timestamp,
    pub edge_feat: Option<u32>,
}

/// Per-node append-only interaction history.
#[derive(Debug, Clone, Default)]
pub struct HistoryStore {
    lists: Vec<Vec<HistEntry>>,
}

impl HistoryStore {
    pub fn new(num_nodes: usize) -> Self {
        Self {
            lists: vec![Vec::new(); num_nodes],
        }
    }

    /// Records `link` for both endpoints (once for a self-loop).
    pub fn push(&mut self, link: &TemporalLink) {
        let need = link.src.max(link.dst) as usize + 1;
        if self.lists.len() < need {
            self.lists.resize_with(need, Vec::new);
        }
        let mut add = |u: NodeId, v: NodeId| {
            let list = &mut self.lists[u as usize];
            debug_assert!(list.last().is_none_or(|e| e.ts <= link.ts));
            list.push(HistEntry {
                nbr: v,
                ts: link.ts,
                edge_feat: link.edge_feat,
            });
        };
        add(link.src, link.dst);
        if !link.is_self_loop() {
            add(link.dst, link.src);
        }
    }

    pub fn history(&self, u: NodeId) -> &[HistEntry] {
        self.lists.get(u as usize).map_or(&[], Vec::as_slice)
    }

    pub fn total_entries(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// Full backtrack: every entry of `u` strictly before `t`.
    fn candidates(&self, u: NodeId, t: Timestamp) -> Vec<HistEntry> {
        self.history(u)
            .iter()
            .filter(|e| e.ts < t)
            .copied()
            .collect()
    }

    /// The `s` most recent entries strictly before `t`, oldest first.
    pub fn sample_truncation(&self, u: NodeId, t: Timestamp, s: usize) -> Vec<HistEntry> {
        let h = self.history(u);
        let end = h.partition_point(|e| e.ts < t);
        h[end.saturating_sub(s)..end].to_vec()
    }

    /// `s` entries drawn uniformly without replacement from those before `t`.
    pub fn sample_uniform(
        &self,
        u: NodeId,
        t: Timestamp,
        s: usize,
        rng: &mut impl Rng,
    ) -> Vec<HistEntry> {
        let mut cands = self.candidates(u, t);
        let k = s.min(cands.len());
        for i in 0..k {
            let j = rng.random_range(i..cands.len());
            cands.swap(i, j);
        }
        cands.truncate(k);
        cands
    }

    /// `s` entries drawn without replacement with weights
    /// `exp(c (ts - t))`, via the exponential race in log space: each
    /// candidate gets key `log w - max log w + Gumbel`, and the `s` largest
    /// keys win.
    pub fn sample_recent(
        &self,
        u: NodeId,
        t: Timestamp,
        s: usize,
        c: f64,
        rng: &mut impl Rng,
    ) -> Vec<HistEntry> {
        assert!(c >= 0.0, "recency constant must be non-negative");
        let cands = self.candidates(u, t);
        if cands.len() <= s {
            return cands;
        }
        let logw: Vec<f64> = cands.iter().map(|e| c * (e.ts - t) as f64).collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut keyed: Vec<(f64, usize)> = logw
            .iter()
            .enumerate()
            .map(|(i, lw)| {
                let u: f64 = rng.random::<f64>();
                // 1 - u lies in (0, 1], keeping the log finite.
                let gumbel = -(-(1.0 - u).ln()).ln();
                (lw - max + gumbel, i)
            })
            .collect();
        keyed.select_nth_unstable_by(s - 1, |a, b| b.0.total_cmp(&a.0));
        let mut chosen: Vec<usize> = keyed[..s].iter().map(|&(_, i)| i).collect();
        chosen.sort_unstable();
        chosen.into_iter().map(|i| cands[i]).collect()
    }
}
