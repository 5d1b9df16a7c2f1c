use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::stream::NodeId;
use crate::{Error, Result};

/// Arrival process for one center node.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonStreamSpec {
    /// Total intensity when neighbors are drawn uniformly from the pool.
    pub lambda: f64,
    pub horizon: f64,
    /// Independent per-neighbor processes, merged by superposition. When
    /// set, `lambda` and `pool_size` are ignored.
    pub per_neighbor_lambdas: Option<Vec<(NodeId, f64)>>,
    /// Neighbor ids are drawn uniformly from `0..pool_size`.
    pub pool_size: u32,
}

impl PoissonStreamSpec {
    pub fn uniform(lambda: f64, horizon: f64) -> Self {
        Self {
            lambda,
            horizon,
            per_neighbor_lambdas: None,
            pool_size: 10_000,
        }
    }

    pub fn per_neighbor(lambdas: Vec<(NodeId, f64)>, horizon: f64) -> Self {
        Self {
            lambda: lambdas.iter().map(|(_, l)| l).sum(),
            horizon,
            per_neighbor_lambdas: Some(lambdas),
            pool_size: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be >= 0, got {}",
                self.horizon
            )));
        }
        match &self.per_neighbor_lambdas {
            Some(ls) => {
                if ls.is_empty() || ls.iter().any(|&(_, l)| !(l > 0.0 && l.is_finite())) {
                    return Err(Error::Config("per-neighbor intensities must be > 0".into()));
                }
            }
            None => {
                if !(self.lambda > 0.0 && self.lambda.is_finite()) {
                    return Err(Error::Config(format!(
                        "lambda must be > 0, got {}",
                        self.lambda
                    )));
                }
                if self.pool_size == 0 {
                    return Err(Error::Config("neighbor pool must be non-empty".into()));
                }
            }
        }
        Ok(())
    }

    pub fn total_intensity(&self) -> f64 {
        match &self.per_neighbor_lambdas {
            Some(ls) => ls.iter().map(|(_, l)| l).sum(),
            None => self.lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonEvent {
    pub t: f64,
    pub nbr: NodeId,
}

/// Appends the events falling in `(start, end]`.
pub(crate) fn events_between(
    spec: &PoissonStreamSpec,
    start: f64,
    end: f64,
    rng: &mut impl Rng,
    out: &mut Vec<PoissonEvent>,
) {
    let total = spec.total_intensity();
    let gap = Exp::new(total).expect("validated intensity");
    let mut t = start;
    loop {
        t += gap.sample(rng);
        if t > end {
            break;
        }
        let nbr = match &spec.per_neighbor_lambdas {
            Some(ls) => {
                let mut x = rng.random::<f64>() * total;
                let mut pick = ls[ls.len() - 1].0;
                for &(v, l) in ls {
                    if x < l {
                        pick = v;
                        break;
                    }
                    x -= l;
                }
                pick
            }
            None => rng.random_range(0..spec.pool_size),
        };
        out.push(PoissonEvent { t, nbr });
    }
}

/// Events on `[0, horizon]` with i.i.d. exponential gaps.
pub fn gen_poisson_stream(
    spec: &PoissonStreamSpec,
    rng: &mut impl Rng,
) -> Result<Vec<PoissonEvent>> {
    spec.validate()?;
    let mut out = Vec::new();
    events_between(spec, 0.0, spec.horizon, rng, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_count_is_lambda_t() {
        let spec = PoissonStreamSpec::uniform(2.0, 50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let total: usize = (0..n)
            .map(|_| gen_poisson_stream(&spec, &mut rng).unwrap().len())
            .sum();
        let mean = total as f64 / n as f64;
        // sd of the mean = sqrt(100 / 1e4) = 0.1
        assert!((mean - 100.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn zero_horizon_is_empty() {
        let spec = PoissonStreamSpec::uniform(2.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(gen_poisson_stream(&spec, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn superposition_ratio() {
        let spec = PoissonStreamSpec::per_neighbor(vec![(1, 1.0), (2, 3.0)], 25_000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ev = gen_poisson_stream(&spec, &mut rng).unwrap();
        let ev = &ev[..100_000.min(ev.len())];
        assert!(ev.len() >= 99_000);
        let f = ev.iter().filter(|e| e.nbr == 2).count() as f64 / ev.len() as f64;
        assert!((f - 0.75).abs() < 0.01, "frequency {f}");
    }

    #[test]
    fn gaps_are_sorted_and_positive() {
        let spec = PoissonStreamSpec::uniform(5.0, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ev = gen_poisson_stream(&spec, &mut rng).unwrap();
        assert!(ev.windows(2).all(|w| w[0].t < w[1].t));
        assert!(ev.iter().all(|e| e.t > 0.0 && e.t <= 10.0));
    }

    #[test]
    fn invalid_specs() {
        assert!(PoissonStreamSpec::uniform(0.0, 1.0).validate().is_err());
        assert!(PoissonStreamSpec::uniform(1.0, -1.0).validate().is_err());
        assert!(PoissonStreamSpec::per_neighbor(vec![(0, 0.0)], 1.0)
            .validate()
            .is_err());
    }
}
