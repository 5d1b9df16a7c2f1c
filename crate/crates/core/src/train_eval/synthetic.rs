//! Seeded synthetic interaction streams.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::rng::CounterRng;
use crate::stream::{NodeId, TemporalStream, Timestamp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Uniform random source and destination.
    Poisson,
    /// The destination is the source's most recent distinct partner with
    /// probability `repeat_prob`, else uniform.
    RecencyTask,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Self::Poisson),
            "recency-task" => Ok(Self::RecencyTask),
            _ => Err(Error::Config(format!(
                "unknown synthetic kind {s:?} (poisson|recency-task)"
            ))),
        }
    }
}

impl std::fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Poisson => "poisson",
            Self::RecencyTask => "recency-task",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub nodes: usize,
    /// Events per unit time.
    pub lambda: f64,
    pub horizon: f64,
    pub repeat_prob: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, nodes: usize, lambda: f64, horizon: f64, seed: u64) -> Self {
        Self {
            kind,
            nodes,
            lambda,
            horizon,
            repeat_prob: 0.8,
            seed,
        }
    }
}

/// Timestamps are event times in milliseconds.
pub const TICKS_PER_UNIT: f64 = 1000.0;

/// Generates about `lambda * horizon` events with exponential gaps.
pub fn generate(spec: &SyntheticSpec) -> Result<TemporalStream> {
    if spec.nodes < 2 {
        return Err(Error::Config(
            "synthetic streams need at least 2 nodes".into(),
        ));
    }
    if !(spec.lambda > 0.0
        && spec.lambda.is_finite()
        && spec.horizon > 0.0
        && spec.horizon.is_finite())
    {
        return Err(Error::Config(
            "lambda and horizon must be positive and finite".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.repeat_prob) {
        return Err(Error::Config("repeat_prob must be in [0, 1]".into()));
    }
    let mut rng = CounterRng::new(spec.seed).stream(0x7379_6e74);
    let gap = Exp::new(spec.lambda).map_err(|e| Error::Config(e.to_string()))?;
    let n = spec.nodes as NodeId;
    let mut last_partner: Vec<Option<NodeId>> = vec![None; spec.nodes];
    let mut triples = Vec::with_capacity((spec.lambda * spec.horizon * 1.05) as usize + 16);
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t >= spec.horizon {
            break;
        }
        let src = rng.random_range(0..n);
        let repeat = match spec.kind {
            SyntheticKind::Poisson => None,
            SyntheticKind::RecencyTask => {
                last_partner[src as usize].filter(|_| rng.random_bool(spec.repeat_prob))
            }
        };
        let dst = repeat.unwrap_or_else(|| {
            // Uniform over the other nodes.
            let d = rng.random_range(0..n - 1);
            if d >= src {
                d + 1
            } else {
                d
            }
        });
        last_partner[src as usize] = Some(dst);
        last_partner[dst as usize] = Some(src);
        triples.push((src, dst, (t * TICKS_PER_UNIT).floor() as Timestamp));
    }
    let mut stream = TemporalStream::from_triples(&triples)?;
    stream.num_nodes = spec.nodes;
    stream.id_map = crate::stream::IdMap::identity(spec.nodes);
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_count_and_ordering() {
        let s = generate(&SyntheticSpec::new(
            SyntheticKind::Poisson,
            50,
            100.0,
            20.0,
            1,
        ))
        .unwrap();
        // Poisson(2000): 5 sigma is about 224.
        assert!((s.len() as f64 - 2000.0).abs() < 224.0, "{}", s.len());
        assert!(s.links.windows(2).all(|w| w[0].ts <= w[1].ts));
        assert!(s
            .links
            .iter()
            .all(|l| l.src != l.dst && (l.dst as usize) < 50));
        assert_eq!(s.num_nodes, 50);
    }

    #[test]
    fn recency_task_repeats_last_partner() {
        let s = generate(&SyntheticSpec::new(
            SyntheticKind::RecencyTask,
            100,
            100.0,
            50.0,
            2,
        ))
        .unwrap();
        let mut last: Vec<Option<NodeId>> = vec![None; 100];
        let (mut hits, mut eligible) = (0usize, 0usize);
        for l in &s.links {
            if let Some(p) = last[l.src as usize] {
                eligible += 1;
                hits += (p == l.dst) as usize;
            }
            last[l.src as usize] = Some(l.dst);
            last[l.dst as usize] = Some(l.src);
        }
        // 0.8 + 0.2 / 99 by construction.
        let rate = hits as f64 / eligible as f64;
        assert!((rate - 0.802).abs() < 0.02, "{rate}");
    }

    #[test]
    fn seeded() {
        let spec = SyntheticSpec::new(SyntheticKind::RecencyTask, 20, 10.0, 10.0, 3);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }
}
