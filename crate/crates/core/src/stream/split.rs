use std::collections::BTreeSet;
use std::ops::Range;

use super::{NodeId, TemporalLink, TemporalStream};
use crate::rng::CounterRng;
use crate::{Error, Result};

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.70, 0.15, 0.15);

/// Chronological train/val/test partition of a stream, plus the node mask
/// used for inductive training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitView {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    pub masked_nodes: BTreeSet<NodeId>,
}

impl SplitView {
    pub fn len(&self) -> usize {
        self.test.end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn touches_mask(&self, l: &TemporalLink) -> bool {
        self.masked_nodes.contains(&l.src) || self.masked_nodes.contains(&l.dst)
    }

    /// Training links with every link incident to a masked node removed.
    pub fn train_links(&self, stream: &TemporalStream) -> Vec<TemporalLink> {
        stream.links[self.train.clone()]
            .iter()
            .filter(|l| !self.touches_mask(l))
            .copied()
            .collect()
    }

    pub fn val_links<'a>(&self, stream: &'a TemporalStream) -> &'a [TemporalLink] {
        &stream.links[self.val.clone()]
    }

    pub fn test_links<'a>(&self, stream: &'a TemporalStream) -> &'a [TemporalLink] {
        &stream.links[self.test.clone()]
    }

    /// Unmasked train plus val, in order: the replay prefix before testing.
    pub fn train_val_links<'a>(&self, stream: &'a TemporalStream) -> &'a [TemporalLink] {
        &stream.links[self.train.start..self.val.end]
    }
}

fn boundary(ratio: f64, n: usize) -> usize {
    // The epsilon absorbs representation error in e.g. 0.85 * 100.
    ((ratio * n as f64) + 1e-9).floor() as usize
}

/// Splits `n` events at `floor(r0 n)` and `floor((r0 + r1) n)`.
///
/// The training range is never empty for a non-empty stream, so a
/// single-event stream yields `train = {0}`.
pub fn chronological_split(stream: &TemporalStream, ratios: (f64, f64, f64)) -> Result<SplitView> {
    split_len(stream.len(), ratios)
}

pub(crate) fn split_len(n: usize, (r0, r1, r2): (f64, f64, f64)) -> Result<SplitView> {
    if n == 0 {
        return Err(Error::EmptyStream);
    }
    if [r0, r1, r2].iter().any(|r| !(0.0..=1.0).contains(r)) || (r0 + r1 + r2 - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be in [0,1] and sum to 1, got ({r0}, {r1}, {r2})"
        )));
    }
    let b1 = boundary(r0, n).clamp(1, n);
    let b2 = boundary(r0 + r1, n).clamp(b1, n);
    Ok(SplitView {
        train: 0..b1,
        val: b1..b2,
        test: b2..n,
        masked_nodes: BTreeSet::new(),
    })
}

/// Masks each distinct node seen in val/test independently with
/// probability `p`. The decision for a node depends only on `(seed, node)`.
pub fn inductive_mask(split: &SplitView, stream: &TemporalStream, p: f64, seed: u64) -> SplitView {
    let rng = CounterRng::new(seed).derive(0x6d61_736b);
    let candidates = TemporalStream::nodes_in(&stream.links[split.val.start..split.test.end]);
    let masked_nodes = candidates
        .into_iter()
        .filter(|&v| rng.uniform(v as u64, 0) < p)
        .collect();
    SplitView {
        masked_nodes,
        ..split.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> TemporalStream {
        let triples: Vec<_> = (0..n)
            .map(|i| (i as u32 % 13, (i as u32 * 7 + 1) % 13, i as i64 / 2))
            .collect();
        TemporalStream::from_triples(&triples).unwrap()
    }

    #[test]
    fn exact_ratio_boundaries() {
        let v = split_len(100, DEFAULT_RATIOS).unwrap();
        assert_eq!((v.train, v.val, v.test), (0..70, 70..85, 85..100));
    }

    #[test]
    fn floor_arithmetic() {
        let v = split_len(7, DEFAULT_RATIOS).unwrap();
        assert_eq!((v.train.end, v.val.end), (4, 5));
    }

    #[test]
    fn single_event() {
        let v = split_len(1, DEFAULT_RATIOS).unwrap();
        assert_eq!((v.train, v.val.len(), v.test.len()), (0..1, 0, 0));
    }

    #[test]
    fn empty_and_bad_ratios() {
        assert!(matches!(
            split_len(0, DEFAULT_RATIOS),
            Err(Error::EmptyStream)
        ));
        assert!(matches!(
            split_len(10, (0.5, 0.5, 0.5)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mask_bounds_and_determinism() {
        let s = chain(200);
        let split = chronological_split(&s, DEFAULT_RATIOS).unwrap();
        assert_eq!(inductive_mask(&split, &s, 0.0, 1), split);
        let all = inductive_mask(&split, &s, 1.0, 1);
        assert_eq!(
            all.masked_nodes,
            TemporalStream::nodes_in(&s.links[split.val.start..])
        );
        let a = inductive_mask(&split, &s, 0.1, 42);
        let b = inductive_mask(&split, &s, 0.1, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn masked_view_has_no_masked_links() {
        let s = chain(500);
        let split = chronological_split(&s, DEFAULT_RATIOS).unwrap();
        let m = inductive_mask(&split, &s, 0.3, 9);
        assert!(!m.masked_nodes.is_empty());
        for l in m.train_links(&s) {
            assert!(!m.masked_nodes.contains(&l.src) && !m.masked_nodes.contains(&l.dst));
        }
    }

    proptest::proptest! {
        #[test]
        fn split_covers_and_is_chronological(n in 1usize..5000) {
            let s = chain(n);
            let v = chronological_split(&s, DEFAULT_RATIOS).unwrap();
            proptest::prop_assert_eq!(v.train.start, 0);
            proptest::prop_assert_eq!(v.train.end, v.val.start);
            proptest::prop_assert_eq!(v.val.end, v.test.start);
            proptest::prop_assert_eq!(v.test.end, n);
            let last_train = s.links[v.train.end - 1].ts;
            proptest::prop_assert!(s.links[v.train.end..].iter().all(|l| l.ts >= last_train));
        }
    }
}
