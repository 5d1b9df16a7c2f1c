use std::collections::HashMap;

use super::{NodeId, NodeLabelEvent, TemporalLink};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSide {
    Src,
    Dst,
}

/// A label resolved onto the link where it becomes a prediction event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledLink {
    /// Position of the link in the slice passed to [`assign_labels_to_links`].
    pub link_pos: usize,
    pub side: LabelSide,
    pub node: NodeId,
    pub label: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelAssignment {
    /// Sorted by `link_pos`; labels sharing a link keep their input order.
    pub events: Vec<LabeledLink>,
    /// Labels with no link of their node at or after the label time.
    pub dropped: usize,
}

/// Attaches every label to the first link of its node with `ts >= label.ts`.
/// `labels` must be sorted by timestamp.
pub fn assign_labels_to_links(
    links: &[TemporalLink],
    labels: &[NodeLabelEvent],
) -> LabelAssignment {
    let mut by_node: HashMap<NodeId, Vec<usize>> = HashMap::new();
    for (pos, l) in links.iter().enumerate() {
        by_node.entry(l.src).or_default().push(pos);
        if l.dst != l.src {
            by_node.entry(l.dst).or_default().push(pos);
        }
    }
    let mut out = LabelAssignment::default();
    for lab in labels {
        let Some(positions) = by_node.get(&lab.node) else {
            out.dropped += 1;
            continue;
        };
        let k = positions.partition_point(|&p| links[p].ts < lab.ts);
        match positions.get(k) {
            Some(&link_pos) => {
                let side = if links[link_pos].src == lab.node {
                    LabelSide::Src
                } else {
                    LabelSide::Dst
                };
                out.events.push(LabeledLink {
                    link_pos,
                    side,
                    node: lab.node,
                    label: lab.label,
                });
            }
            None => out.dropped += 1,
        }
    }
    out.events.sort_by_key(|e| e.link_pos);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::TemporalStream;

    fn label(node: NodeId, ts: i64, label: u32) -> NodeLabelEvent {
        NodeLabelEvent { node, ts, label }
    }

    #[test]
    fn first_link_after_label() {
        let s = TemporalStream::from_triples(&[(0, 1, 3), (2, 0, 7)]).unwrap();
        let a = assign_labels_to_links(&s.links, &[label(0, 5, 1)]);
        assert_eq!(a.dropped, 0);
        assert_eq!(
            a.events,
            vec![LabeledLink {
                link_pos: 1,
                side: LabelSide::Dst,
                node: 0,
                label: 1
            }]
        );
    }

    #[test]
    fn no_future_link_is_dropped() {
        let s = TemporalStream::from_triples(&[(0, 1, 4)]).unwrap();
        let a = assign_labels_to_links(&s.links, &[label(0, 5, 1)]);
        assert!(a.events.is_empty());
        assert_eq!(a.dropped, 1);
    }

    #[test]
    fn two_labels_share_a_link() {
        let s = TemporalStream::from_triples(&[(0, 1, 7), (0, 2, 9)]).unwrap();
        let a = assign_labels_to_links(&s.links, &[label(0, 5, 0), label(0, 6, 1)]);
        assert_eq!(a.events.len(), 2);
        assert!(a
            .events
            .iter()
            .all(|e| e.link_pos == 0 && e.side == LabelSide::Src));
        assert_eq!(a.events[0].label, 0);
        assert_eq!(a.events[1].label, 1);
    }

    #[test]
    fn same_timestamp_attaches_to_that_link() {
        let s = TemporalStream::from_triples(&[(3, 1, 2), (0, 1, 5)]).unwrap();
        let a = assign_labels_to_links(&s.links, &[label(0, 5, 1), label(9, 1, 0)]);
        assert_eq!(a.events[0].link_pos, 1);
        assert_eq!(a.dropped, 1);
    }
}
