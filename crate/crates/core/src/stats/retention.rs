//! Survival of a marked table entry under Poisson arrivals.
//!
//! A trial replays a stream through a single center node's table, forces
//! a probe entry in at a random mid-stream time `t_i`, keeps replaying, and
//! records at each probe offset whether the probe is still present.

use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use super::poisson::{events_between, PoissonEvent, PoissonStreamSpec};
use crate::rng::CounterRng;
use crate::sampler::{KeyScheme, NeighborTable, SamplerConfig};
use crate::stream::{NodeId, Timestamp};
use crate::{Error, Result};

/// Simulation times are quantized to this many units before hashing.
pub const TIME_RESOLUTION: f64 = 1e-3;

/// Feature index that marks the probe entry.
const PROBE_MARK: u32 = u32::MAX - 1;

/// Id space for per-trial neighbor relabeling in the node-wise harness.
const RELABEL_SPACE: u32 = 1 << 24;

pub fn quantize_time(t: f64) -> Timestamp {
    (t / TIME_RESOLUTION).floor() as Timestamp
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetentionBin {
    pub delta_t: f64,
    pub survived: u64,
    pub trials: u64,
    pub theory: f64,
}

impl RetentionBin {
    pub fn empirical(&self) -> f64 {
        self.survived as f64 / self.trials as f64
    }

    pub fn ci(&self) -> (f64, f64) {
        wilson_interval(self.survived, self.trials, 1.96)
    }

    pub fn std_error(&self) -> f64 {
        let p = self.empirical();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetentionCurve {
    pub bins: Vec<RetentionBin>,
}

impl RetentionCurve {
    pub fn max_abs_error(&self) -> f64 {
        self.bins
            .iter()
            .map(|b| (b.empirical() - b.theory).abs())
            .fold(0.0, f64::max)
    }

    /// `delta_t,empirical,theory,ci_low,ci_high,trials`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta_t,empirical,theory,ci_low,ci_high,trials\n");
        for b in &self.bins {
            let (lo, hi) = b.ci();
            writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6},{}",
                b.delta_t,
                b.empirical(),
                b.theory,
                lo,
                hi,
                b.trials
            )
            .unwrap();
        }
        s
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Gnuplot script plotting the curve stored at `csv_path`.
    pub fn gnuplot_script(csv_path: &str, title: &str) -> String {
        format!(
            "set datafile separator ','\n\
             set key autotitle columnhead\n\
             set title '{title}'\n\
             set xlabel 'delta t'\n\
             set ylabel 'retention probability'\n\
             set yrange [0:1.05]\n\
             plot '{csv_path}' using 1:4:5 with filledcurves lc rgb '#cccccc' title '95% CI', \\\n\
             \x20    '' using 1:2 with linespoints title 'empirical', \\\n\
             \x20    '' using 1:3 with lines dt 2 title 'theory'\n"
        )
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// `exp(-alpha lambda dt / s)`.
pub fn edge_retention_theory(alpha: f64, lambda: f64, slots: usize, dt: f64) -> f64 {
    (-alpha * lambda * dt / slots as f64).exp()
}

/// `prod_j ((s-1)/s + exp(-alpha lambda_j dt) / s)` over the competitors `j`.
pub fn node_retention_theory(alpha: f64, competitor_lambdas: &[f64], slots: usize, dt: f64) -> f64 {
    let s = slots as f64;
    competitor_lambdas
        .iter()
        .map(|l| (s - 1.0) / s + (-alpha * l * dt).exp() / s)
        .product()
}

fn check_deltas(deltas: &[f64], horizon: f64) -> Result<Vec<f64>> {
    if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::Config(
            "probe deltas must be non-empty and >= 0".into(),
        ));
    }
    let max = deltas.iter().copied().fold(0.0, f64::max);
    if horizon < max {
        return Err(Error::Config(format!(
            "horizon {horizon} is shorter than the largest probe delta {max}"
        )));
    }
    Ok(deltas.to_vec())
}

struct Trial<'a> {
    cfg: SamplerConfig,
    spec: &'a PoissonStreamSpec,
    deltas: &'a [f64],
    max_delta: f64,
}

impl Trial<'_> {
    /// Returns one survival flag per delta.
    fn run(&self, trial: u64) -> Vec<bool> {
        let root = CounterRng::new(self.cfg.seed);
        let mut rng = root.stream(trial);
        let cfg = SamplerConfig {
            seed: root.bits(trial, 7),
            ..self.cfg
        };
        let mut table = NeighborTable::new(1, cfg).expect("validated config");

        // Node-wise runs relabel the logical neighbors with fresh random ids
        // so that hash collisions between them are random per trial.
        let relabel: Vec<NodeId> = match &self.spec.per_neighbor_lambdas {
            Some(ls) => {
                let mut ids: Vec<NodeId> = Vec::with_capacity(ls.len());
                while ids.len() < ls.len() {
                    let id = rng.random_range(0..RELABEL_SPACE);
                    if !ids.contains(&id) {
                        ids.push(id);
                    }
                }
                ids
            }
            None => Vec::new(),
        };
        let map_id = |ev: &PoissonEvent| -> NodeId {
            match &self.spec.per_neighbor_lambdas {
                Some(ls) => relabel[ls.iter().position(|(v, _)| *v == ev.nbr).unwrap()],
                None => ev.nbr,
            }
        };

        let t_i = rng.random::<f64>() * (self.spec.horizon - self.max_delta);
        let mut events = Vec::new();
        events_between(self.spec, 0.0, t_i, &mut rng, &mut events);
        let mut event_idx = 0u64;
        for ev in &events {
            table
                .insert_neighbor(0, map_id(ev), quantize_time(ev.t), None, event_idx, 0)
                .expect("center node exists");
            event_idx += 1;
        }

        let probe_nbr = match &self.spec.per_neighbor_lambdas {
            Some(_) => relabel[0],
            None => rng.random_range(0..self.spec.pool_size),
        };
        let slot = table
            .force_insert(0, probe_nbr, quantize_time(t_i), Some(PROBE_MARK))
            .expect("slots >= 1");
        event_idx += 1;

        let node_wise = self.cfg.scheme == KeyScheme::Node;
        let alive = |table: &NeighborTable| {
            let sl = table.node_slots(0)[slot];
            if node_wise {
                sl.nbr() == probe_nbr
            } else {
                sl.edge_feat() == Some(PROBE_MARK)
            }
        };

        events.clear();
        events_between(self.spec, t_i, t_i + self.max_delta, &mut rng, &mut events);
        let mut order: Vec<usize> = (0..self.deltas.len()).collect();
        order.sort_by(|&a, &b| self.deltas[a].total_cmp(&self.deltas[b]));
        let mut out = vec![false; self.deltas.len()];
        let mut next = 0usize;
        let mut still = true;
        for ev in &events {
            while next < order.len() && t_i + self.deltas[order[next]] < ev.t {
                out[order[next]] = still;
                next += 1;
            }
            table
                .insert_neighbor(0, map_id(ev), quantize_time(ev.t), None, event_idx, 0)
                .expect("center node exists");
            event_idx += 1;
            // Node-wise survival ends at the first overwrite by another node,
            // even if the probe's neighbor later reclaims the slot.
            still = still && alive(&table);
        }
        for &k in &order[next..] {
            out[k] = still;
        }
        out
    }
}

fn run_trials(trial: &Trial<'_>, trials: u64, theory: impl Fn(f64) -> f64) -> RetentionCurve {
    let survived = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; trial.deltas.len()],
            |mut acc, k| {
                for (a, alive) in acc.iter_mut().zip(trial.run(k)) {
                    *a += alive as u64;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; trial.deltas.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    RetentionCurve {
        bins: trial
            .deltas
            .iter()
            .zip(survived)
            .map(|(&dt, k)| RetentionBin {
                delta_t: dt,
                survived: k,
                trials,
                theory: theory(dt),
            })
            .collect(),
    }
}

/// Edge-keyed retention against `exp(-alpha lambda dt / s)`. Neighbor ids
/// come from a pool of `spec.pool_size` ids; with a pool that is small
/// relative to `s` the fixed hash makes collisions non-uniform and the
/// closed form no longer applies.
pub fn measure_retention_edge(
    cfg: &SamplerConfig,
    spec: &PoissonStreamSpec,
    trials: u64,
    probe_deltas: &[f64],
) -> Result<RetentionCurve> {
    if cfg.scheme != KeyScheme::Edge {
        return Err(Error::Config("edge retention needs the edge scheme".into()));
    }
    if spec.per_neighbor_lambdas.is_some() {
        return Err(Error::Config(
            "edge retention uses a uniform neighbor pool".into(),
        ));
    }
    measure(cfg, spec, trials, probe_deltas, |dt| {
        edge_retention_theory(cfg.alpha, spec.lambda, cfg.slots, dt)
    })
}

/// Node-keyed retention of the first neighbor in
/// `spec.per_neighbor_lambdas` against the product over its competitors.
pub fn measure_retention_node(
    cfg: &SamplerConfig,
    spec: &PoissonStreamSpec,
    trials: u64,
    probe_deltas: &[f64],
) -> Result<RetentionCurve> {
    if cfg.scheme != KeyScheme::Node {
        return Err(Error::Config("node retention needs the node scheme".into()));
    }
    let Some(ls) = &spec.per_neighbor_lambdas else {
        return Err(Error::Config(
            "node retention needs per-neighbor intensities".into(),
        ));
    };
    let competitors: Vec<f64> = ls[1..].iter().map(|&(_, l)| l).collect();
    measure(cfg, spec, trials, probe_deltas, |dt| {
        node_retention_theory(cfg.alpha, &competitors, cfg.slots, dt)
    })
}

fn measure(
    cfg: &SamplerConfig,
    spec: &PoissonStreamSpec,
    trials: u64,
    probe_deltas: &[f64],
    theory: impl Fn(f64) -> f64,
) -> Result<RetentionCurve> {
    spec.validate()?;
    cfg.validate(1)?;
    if cfg.slots == 0 {
        return Err(Error::ZeroSlots);
    }
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let deltas = check_deltas(probe_deltas, spec.horizon)?;
    let max_delta = deltas.iter().copied().fold(0.0, f64::max);
    let trial = Trial {
        cfg: *cfg,
        spec,
        deltas: &deltas,
        max_delta,
    };
    Ok(run_trials(&trial, trials, theory))
}
