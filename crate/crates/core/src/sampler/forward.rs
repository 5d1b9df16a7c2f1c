//! Per-node fixed-size neighbor tables maintained forward in time.
//!
//! Node `u` owns `s` consecutive slots. A new neighbor `(v, t)` of `u` goes
//! to slot `hash(key) mod s`: the key is `(v, t)` for the edge scheme and
//! `v` for the node scheme. An empty slot is always filled; an occupied one
//! is overwritten with probability `alpha`. Each event touches exactly one
//! slot per endpoint, regardless of how long the node's history is.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;
use crate::stream::{NodeId, TemporalLink, Timestamp};
use crate::{Error, Result};

pub const DEFAULT_Q1: u64 = 1_000_000_007;
pub const DEFAULT_Q2: u64 = 998_244_353;

/// Batches smaller than this are applied sequentially.
const PAR_BATCH_MIN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyScheme {
    /// Key `(v, t)`: every interaction is a distinct entry.
    Edge,
    /// Key `v`: one fixed slot per neighbor id.
    Node,
}

impl KeyScheme {
    pub(crate) fn code(self) -> u8 {
        match self {
            KeyScheme::Edge => 0,
            KeyScheme::Node => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(KeyScheme::Edge),
            1 => Ok(KeyScheme::Node),
            _ => Err(Error::Format(format!("unknown key scheme code {c}"))),
        }
    }
}

impl std::str::FromStr for KeyScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "edge" => Ok(KeyScheme::Edge),
            "node" => Ok(KeyScheme::Node),
            _ => Err(Error::Config(format!("unknown scheme {s:?} (edge|node)"))),
        }
    }
}

impl std::fmt::Display for KeyScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KeyScheme::Edge => "edge",
            KeyScheme::Node => "node",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub scheme: KeyScheme,
    /// Slots per node.
    pub slots: usize,
    /// Replacement probability on collision, in `(0, 1]`.
    pub alpha: f64,
    pub q1: u64,
    pub q2: u64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            scheme: KeyScheme::Edge,
            slots: 10,
            alpha: 0.9,
            q1: DEFAULT_Q1,
            q2: DEFAULT_Q2,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn edge(slots: usize, alpha: f64) -> Self {
        Self {
            slots,
            alpha,
            ..Self::default()
        }
    }

    pub fn node(slots: usize, alpha: f64) -> Self {
        Self {
            scheme: KeyScheme::Node,
            slots,
            alpha,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        for (name, q) in [("q1", self.q1), ("q2", self.q2)] {
            if !is_prime(q) {
                return Err(Error::Config(format!("{name} = {q} is not prime")));
            }
            if q <= num_nodes as u64 {
                return Err(Error::Config(format!(
                    "{name} = {q} must exceed the node count {num_nodes}"
                )));
            }
        }
        Ok(())
    }

    /// Slot index for key `(v, t)` under this scheme. Requires `slots >= 1`.
    #[inline]
    pub fn slot_of(&self, v: NodeId, t: Timestamp) -> usize {
        let s = self.slots as u64;
        let h = match self.scheme {
            KeyScheme::Edge => self
                .q1
                .wrapping_mul(v as u64)
                .wrapping_add(self.q2.wrapping_mul(t as u64)),
            KeyScheme::Node => self.q1.wrapping_mul(v as u64),
        };
        (h % s) as usize
    }
}

/// `(q1 v + q2 t) mod s` in wrapping 64-bit arithmetic. Negative
/// timestamps are reinterpreted as two's-complement `u64`.
pub fn hash_edge(v: u64, t: i64, cfg: &SamplerConfig) -> Result<usize> {
    if cfg.slots == 0 {
        return Err(Error::ZeroSlots);
    }
    let h = cfg
        .q1
        .wrapping_mul(v)
        .wrapping_add(cfg.q2.wrapping_mul(t as u64));
    Ok((h % cfg.slots as u64) as usize)
}

/// `(q1 v) mod s` in wrapping 64-bit arithmetic.
pub fn hash_node(v: u64, cfg: &SamplerConfig) -> Result<usize> {
    if cfg.slots == 0 {
        return Err(Error::ZeroSlots);
    }
    Ok((cfg.q1.wrapping_mul(v) % cfg.slots as u64) as usize)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for p in BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

const EMPTY_NBR: u32 = u32::MAX;
const NO_FEAT: u32 = u32::MAX;

/// One fixed-width slot: 16 bytes, `nbr == u32::MAX` marks it empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborSlot {
    ts: Timestamp,
    nbr: u32,
    feat: u32,
}

impl NeighborSlot {
    pub const EMPTY: NeighborSlot = NeighborSlot {
        ts: 0,
        nbr: EMPTY_NBR,
        feat: NO_FEAT,
    };

    pub fn new(nbr: NodeId, ts: Timestamp, edge_feat: Option<u32>) -> Self {
        debug_assert_ne!(nbr, EMPTY_NBR, "node id u32::MAX is reserved");
        Self {
            ts,
            nbr,
            feat: edge_feat.unwrap_or(NO_FEAT),
        }
    }

    #[inline]
    pub fn occupied(&self) -> bool {
        self.nbr != EMPTY_NBR
    }

    pub fn nbr(&self) -> NodeId {
        self.nbr
    }

    pub fn ts(&self) -> Timestamp {
        self.ts
    }

    pub fn edge_feat(&self) -> Option<u32> {
        (self.feat != NO_FEAT).then_some(self.feat)
    }
}

/// An occupied slot as returned by [`NeighborTable::snapshot`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotEntry {
    /// Slot index within the node's table, in `0..s`.
    pub slot: usize,
    pub nbr: NodeId,
    pub ts: Timestamp,
    pub edge_feat: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
struct Insert {
    node: NodeId,
    nbr: NodeId,
    ts: Timestamp,
    feat: Option<u32>,
    event_idx: u64,
    lane: u64,
}

/// Flat `num_nodes x s` slot array plus the sampler configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    cfg: SamplerConfig,
    num_nodes: usize,
    slots: Vec<NeighborSlot>,
    rng: CounterRng,
    last_ts: Option<Timestamp>,
}

impl NeighborTable {
    pub fn new(num_nodes: usize, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate(num_nodes)?;
        if num_nodes >= EMPTY_NBR as usize {
            return Err(Error::Config(format!("too many nodes: {num_nodes}")));
        }
        Ok(Self {
            cfg,
            num_nodes,
            slots: vec![NeighborSlot::EMPTY; num_nodes * cfg.slots],
            rng: CounterRng::new(cfg.seed),
            last_ts: None,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn slots_per_node(&self) -> usize {
        self.cfg.slots
    }

    /// Timestamp of the last applied event.
    pub fn last_ts(&self) -> Option<Timestamp> {
        self.last_ts
    }

    pub fn clear(&mut self) {
        self.slots.fill(NeighborSlot::EMPTY);
        self.last_ts = None;
    }

    pub fn raw_slots(&self) -> &[NeighborSlot] {
        &self.slots
    }

    pub fn node_slots(&self, u: NodeId) -> &[NeighborSlot] {
        let s = self.cfg.slots;
        let start = u as usize * s;
        &self.slots[start..start + s]
    }

    fn check_node(&self, u: NodeId) -> Result<()> {
        if (u as usize) < self.num_nodes {
            Ok(())
        } else {
            Err(Error::UnknownNode {
                node: u as u64,
                num_nodes: self.num_nodes,
            })
        }
    }

    /// Applies the insertion rule to one slot array. Returns whether the
    /// slot was written.
    #[inline]
    fn apply(
        cfg: &SamplerConfig,
        rng: &CounterRng,
        node_slots: &mut [NeighborSlot],
        ins: &Insert,
    ) -> bool {
        let a = cfg.slot_of(ins.nbr, ins.ts);
        let slot = &mut node_slots[a];
        let write = !slot.occupied()
            || cfg.alpha >= 1.0
            || rng.uniform(ins.event_idx, ins.lane) < cfg.alpha;
        if write {
            *slot = NeighborSlot::new(ins.nbr, ins.ts, ins.feat);
        }
        write
    }

    fn inserts(link: &TemporalLink) -> impl Iterator<Item = Insert> {
        let fwd = Insert {
            node: link.src,
            nbr: link.dst,
            ts: link.ts,
            feat: link.edge_feat,
            event_idx: link.event_idx,
            lane: 0,
        };
        let back = (!link.is_self_loop()).then_some(Insert {
            node: link.dst,
            nbr: link.src,
            lane: 1,
            ..fwd
        });
        std::iter::once(fwd).chain(back)
    }

    fn note_ts(&mut self, ts: Timestamp) {
        debug_assert!(
            self.last_ts.is_none_or(|p| p <= ts),
            "events must be applied in timestamp order"
        );
        self.last_ts = Some(self.last_ts.map_or(ts, |p| p.max(ts)));
    }

    /// Records `link` in both endpoints' tables.
    ///
    /// # Panics
    /// If an endpoint is not a node of this table.
    pub fn update(&mut self, link: &TemporalLink) {
        self.note_ts(link.ts);
        let s = self.cfg.slots;
        if s == 0 {
            return;
        }
        for ins in Self::inserts(link) {
            let start = ins.node as usize * s;
            assert!(
                (ins.node as usize) < self.num_nodes,
                "node {} out of range {}",
                ins.node,
                self.num_nodes
            );
            Self::apply(
                &self.cfg,
                &self.rng,
                &mut self.slots[start..start + s],
                &ins,
            );
        }
    }

    /// Applies the insertion rule to `u`'s table only (one directed half of
    /// an event). The replacement coin is addressed by `(event_idx, lane)`.
    pub fn insert_neighbor(
        &mut self,
        u: NodeId,
        nbr: NodeId,
        ts: Timestamp,
        edge_feat: Option<u32>,
        event_idx: u64,
        lane: u64,
    ) -> Result<bool> {
        self.check_node(u)?;
        self.note_ts(ts);
        let s = self.cfg.slots;
        if s == 0 {
            return Ok(false);
        }
        let start = u as usize * s;
        let ins = Insert {
            node: u,
            nbr,
            ts,
            feat: edge_feat,
            event_idx,
            lane,
        };
        Ok(Self::apply(
            &self.cfg,
            &self.rng,
            &mut self.slots[start..start + s],
            &ins,
        ))
    }

    /// Inserts `(nbr, ts)` into `u`'s table unconditionally, bypassing the
    /// replacement coin. Returns the slot index.
    pub fn force_insert(
        &mut self,
        u: NodeId,
        nbr: NodeId,
        ts: Timestamp,
        edge_feat: Option<u32>,
    ) -> Result<usize> {
        self.check_node(u)?;
        if self.cfg.slots == 0 {
            return Err(Error::ZeroSlots);
        }
        self.note_ts(ts);
        let a = self.cfg.slot_of(nbr, ts);
        self.slots[u as usize * self.cfg.slots + a] = NeighborSlot::new(nbr, ts, edge_feat);
        Ok(a)
    }

    /// Applies a chronologically ordered batch. The result is identical to
    /// calling [`update`](Self::update) on each link in order; large batches
    /// are partitioned by node id across worker threads.
    pub fn batch_update(&mut self, links: &[TemporalLink]) {
        let s = self.cfg.slots;
        if links.len() < PAR_BATCH_MIN || s == 0 {
            for l in links {
                self.update(l);
            }
            return;
        }
        for l in links {
            self.note_ts(l.ts);
        }
        let mut items: Vec<Insert> = links.iter().flat_map(Self::inserts).collect();
        for it in &items {
            assert!(
                (it.node as usize) < self.num_nodes,
                "node {} out of range",
                it.node
            );
        }
        // Stable: per-node order stays the event order.
        items.sort_by_key(|it| it.node);

        let workers = rayon::current_num_threads().max(1) * 4;
        let nodes_per_part = self.num_nodes.div_ceil(workers).max(1);
        let mut parts: Vec<(usize, &mut [NeighborSlot], &[Insert])> = Vec::with_capacity(workers);
        let mut rest_slots: &mut [NeighborSlot] = &mut self.slots;
        let mut rest_items: &[Insert] = &items;
        let mut first_node = 0usize;
        while first_node < self.num_nodes {
            let end_node = (first_node + nodes_per_part).min(self.num_nodes);
            let (chunk, tail) = rest_slots.split_at_mut((end_node - first_node) * s);
            let cut = rest_items.partition_point(|it| (it.node as usize) < end_node);
            let (its, items_tail) = rest_items.split_at(cut);
            if !its.is_empty() {
                parts.push((first_node, chunk, its));
            }
            rest_slots = tail;
            rest_items = items_tail;
            first_node = end_node;
        }
        let cfg = self.cfg;
        let rng = self.rng;
        parts.into_par_iter().for_each(|(base, chunk, its)| {
            for it in its {
                let start = (it.node as usize - base) * s;
                Self::apply(&cfg, &rng, &mut chunk[start..start + s], it);
            }
        });
    }

    /// Occupied entries of `u`, ordered by slot index. Does not mutate.
    pub fn snapshot(&self, u: NodeId) -> Result<Vec<SnapshotEntry>> {
        let mut out = Vec::with_capacity(self.cfg.slots);
        self.snapshot_into(u, &mut out)?;
        Ok(out)
    }

    pub fn snapshot_into(&self, u: NodeId, out: &mut Vec<SnapshotEntry>) -> Result<()> {
        self.check_node(u)?;
        out.clear();
        out.extend(
            self.node_slots(u)
                .iter()
                .enumerate()
                .filter(|(_, sl)| sl.occupied())
                .map(|(slot, sl)| SnapshotEntry {
                    slot,
                    nbr: sl.nbr,
                    ts: sl.ts,
                    edge_feat: sl.edge_feat(),
                }),
        );
        Ok(())
    }

    /// Binary checkpoint:
    /// `"NLBTABL1" | u64 nodes | u64 s | u8 scheme | f64 alpha | u64 q1 | u64 q2 | u64 seed
    ///  | u8 has_last | i64 last_ts | slots x { u32 nbr, u32 feat, i64 ts }`, little-endian.
    pub fn write_checkpoint(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"NLBTABL1")?;
        w.write_all(&(self.num_nodes as u64).to_le_bytes())?;
        w.write_all(&(self.cfg.slots as u64).to_le_bytes())?;
        w.write_all(&[self.cfg.scheme.code()])?;
        w.write_all(&self.cfg.alpha.to_le_bytes())?;
        w.write_all(&self.cfg.q1.to_le_bytes())?;
        w.write_all(&self.cfg.q2.to_le_bytes())?;
        w.write_all(&self.cfg.seed.to_le_bytes())?;
        w.write_all(&[self.last_ts.is_some() as u8])?;
        w.write_all(&self.last_ts.unwrap_or(0).to_le_bytes())?;
        for sl in &self.slots {
            w.write_all(&sl.nbr.to_le_bytes())?;
            w.write_all(&sl.feat.to_le_bytes())?;
            w.write_all(&sl.ts.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"NLBTABL1" {
            return Err(Error::Format("not a table checkpoint (bad magic)".into()));
        }
        let mut b8 = [0u8; 8];
        let mut b4 = [0u8; 4];
        let mut b1 = [0u8; 1];
        let mut u64_ = |r: &mut dyn Read| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let num_nodes = u64_(r)? as usize;
        let slots = u64_(r)? as usize;
        r.read_exact(&mut b1)?;
        let scheme = KeyScheme::from_code(b1[0])?;
        let alpha = f64::from_bits(u64_(r)?);
        let q1 = u64_(r)?;
        let q2 = u64_(r)?;
        let seed = u64_(r)?;
        r.read_exact(&mut b1)?;
        let has_last = b1[0] != 0;
        let last = u64_(r)? as i64;
        let cfg = SamplerConfig {
            scheme,
            slots,
            alpha,
            q1,
            q2,
            seed,
        };
        let mut table = NeighborTable::new(num_nodes, cfg)?;
        table.last_ts = has_last.then_some(last);
        for sl in table.slots.iter_mut() {
            r.read_exact(&mut b4)?;
            let nbr = u32::from_le_bytes(b4);
            r.read_exact(&mut b4)?;
            let feat = u32::from_le_bytes(b4);
            r.read_exact(&mut b8)?;
            *sl = NeighborSlot {
                ts: i64::from_le_bytes(b8),
                nbr,
                feat,
            };
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_checkpoint(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        Self::read_checkpoint(&mut r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_with(slots: usize, q1: u64, q2: u64) -> SamplerConfig {
        SamplerConfig {
            slots,
            q1,
            q2,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn edge_hash_values() {
        assert_eq!(
            hash_edge(0, 0, &cfg_with(20, DEFAULT_Q1, DEFAULT_Q2)).unwrap(),
            0
        );
        assert_eq!(hash_edge(3, 0, &cfg_with(7, 5, 11)).unwrap(), 1);
        // 5 * 1000000007 + 7 * 998244353 = 11987710506
        assert_eq!(
            hash_edge(5, 7, &cfg_with(20, DEFAULT_Q1, DEFAULT_Q2)).unwrap(),
            6
        );
    }

    #[test]
    fn node_hash_values() {
        assert_eq!(
            hash_node(0, &cfg_with(20, DEFAULT_Q1, DEFAULT_Q2)).unwrap(),
            0
        );
        assert_eq!(hash_node(4, &cfg_with(5, 7, 11)).unwrap(), 3);
        let c = cfg_with(6, 1, 11);
        let base = hash_node(4, &c).unwrap();
        for k in 0..10u64 {
            assert_eq!(hash_node(4 + 6 * k, &c).unwrap(), base);
        }
    }

    #[test]
    fn zero_slots_rejected_by_hash() {
        let c = cfg_with(0, DEFAULT_Q1, DEFAULT_Q2);
        assert!(matches!(hash_edge(1, 1, &c), Err(Error::ZeroSlots)));
        assert!(matches!(hash_node(1, &c), Err(Error::ZeroSlots)));
    }

    #[test]
    fn slot_of_matches_public_hashes() {
        let e = SamplerConfig::edge(13, 0.5);
        let n = SamplerConfig::node(13, 0.5);
        for v in 0..50u32 {
            for t in [0i64, 1, 977, 123_456_789] {
                assert_eq!(e.slot_of(v, t), hash_edge(v as u64, t, &e).unwrap());
                assert_eq!(n.slot_of(v, t), hash_node(v as u64, &n).unwrap());
            }
        }
    }

    #[test]
    fn primality() {
        assert!(is_prime(DEFAULT_Q1) && is_prime(DEFAULT_Q2));
        assert!(is_prime(2) && is_prime(97) && !is_prime(1) && !is_prime(91));
        assert!(!is_prime(1_000_000_007u64 * 3));
        assert!(is_prime(18_446_744_073_709_551_557)); // largest 64-bit prime
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::edge(10, 0.0).validate(10).is_err());
        assert!(SamplerConfig::edge(10, 1.5).validate(10).is_err());
        assert!(SamplerConfig::edge(10, 1.0).validate(10).is_ok());
        assert!(cfg_with(10, 91, DEFAULT_Q2).validate(10).is_err());
        assert!(cfg_with(10, 7, 11).validate(10).is_err()); // q1 <= |V|
    }

    #[test]
    fn fresh_table_is_empty_and_single_insert_is_visible() {
        let mut t = NeighborTable::new(4, SamplerConfig::edge(5, 0.9)).unwrap();
        assert!(t.snapshot(0).unwrap().is_empty());
        t.update(&TemporalLink::new(1, 2, 10, 0).with_feat(3));
        let a = t.snapshot(1).unwrap();
        let b = t.snapshot(2).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!((a[0].nbr, a[0].ts, a[0].edge_feat), (2, 10, Some(3)));
        assert_eq!((b[0].nbr, b[0].ts, b[0].edge_feat), (1, 10, Some(3)));
        assert!(t.snapshot(0).unwrap().is_empty());
        assert!(matches!(
            t.snapshot(4),
            Err(Error::UnknownNode { node: 4, .. })
        ));
    }

    #[test]
    fn self_loop_inserted_once() {
        let mut t = NeighborTable::new(2, SamplerConfig::edge(8, 0.9)).unwrap();
        t.update(&TemporalLink::new(1, 1, 3, 0));
        assert_eq!(t.snapshot(1).unwrap().len(), 1);
    }

    #[test]
    fn alpha_one_always_replaces() {
        let mut t = NeighborTable::new(3, SamplerConfig::node(1, 1.0)).unwrap();
        for i in 0..100u64 {
            let v = 1 + (i % 2) as u32;
            t.update(&TemporalLink::new(0, v, i as i64, i));
            assert_eq!(t.snapshot(0).unwrap()[0].nbr, v);
        }
    }

    #[test]
    fn replacement_frequency_matches_alpha() {
        // s = 1 so every insertion after the first collides.
        let mut t = NeighborTable::new(2, SamplerConfig::edge(1, 0.9).with_seed(11)).unwrap();
        t.update(&TemporalLink::new(0, 1, 0, 0));
        let trials = 100_000u64;
        let mut replaced = 0u64;
        for i in 1..=trials {
            let before = t.node_slots(0)[0];
            t.update(&TemporalLink::new(0, 1, i as i64, i));
            if t.node_slots(0)[0] != before {
                replaced += 1;
            }
        }
        let f = replaced as f64 / trials as f64;
        assert!((f - 0.9).abs() < 0.005, "replacement frequency {f}");
    }

    #[test]
    fn long_stream_on_one_node_stays_bounded() {
        let mut t = NeighborTable::new(1001, SamplerConfig::edge(10, 0.9)).unwrap();
        for i in 0..10_000u64 {
            t.update(&TemporalLink::new(0, 1 + (i % 1000) as u32, i as i64, i));
        }
        let snap = t.snapshot(0).unwrap();
        let occupied = t.node_slots(0).iter().filter(|s| s.occupied()).count();
        assert_eq!(snap.len(), occupied.min(10));
        assert!(snap.len() <= 10);
    }

    #[test]
    fn zero_slots_is_a_no_op() {
        let mut t = NeighborTable::new(3, SamplerConfig::edge(0, 0.9)).unwrap();
        t.update(&TemporalLink::new(0, 1, 1, 0));
        t.batch_update(&[TemporalLink::new(1, 2, 2, 1)]);
        assert!(t.snapshot(0).unwrap().is_empty());
        assert!(t.snapshot(1).unwrap().is_empty());
    }

    #[test]
    fn constructed_collision_in_batch() {
        // Both events land in slot 0 of node 0 (s = 1); the second must see
        // the first's occupancy and so face the coin.
        let cfg = SamplerConfig::edge(1, 0.5).with_seed(3);
        let batch = [TemporalLink::new(0, 1, 5, 0), TemporalLink::new(0, 2, 6, 1)];
        let mut seq = NeighborTable::new(3, cfg).unwrap();
        for l in &batch {
            seq.update(l);
        }
        let mut bat = NeighborTable::new(3, cfg).unwrap();
        bat.batch_update(&batch);
        assert_eq!(seq, bat);
        let rng = CounterRng::new(3);
        let expect = if rng.uniform(1, 0) < 0.5 { 2 } else { 1 };
        assert_eq!(bat.snapshot(0).unwrap()[0].nbr, expect);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut t = NeighborTable::new(50, SamplerConfig::node(4, 0.7).with_seed(5)).unwrap();
        for i in 0..500u64 {
            t.update(
                &TemporalLink::new((i % 50) as u32, ((i * 7) % 50) as u32, i as i64, i)
                    .with_feat(i as u32),
            );
        }
        let mut buf = Vec::new();
        t.write_checkpoint(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 8 + 1 + 8 * 4 + 1 + 8 + 50 * 4 * 16);
        let back = NeighborTable::read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }
}
