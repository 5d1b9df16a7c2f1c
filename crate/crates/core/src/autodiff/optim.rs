use super::{ParamStore, Real, Tensor};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor<F>>,
    v: Vec<Tensor<F>>,
    step: i32,
}

impl<F: Real> Adam<F> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    pub fn step(&mut self, store: &mut ParamStore<F>) {
        if self.m.len() != store.len() {
            self.m = store
                .ids()
                .map(|id| Tensor::zeros(store.value(id).rows, store.value(id).cols))
                .collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let (b1, b2) = (F::lit(self.beta1), F::lit(self.beta2));
        let c1 = F::lit(1.0 - self.beta1.powi(self.step));
        let c2 = F::lit(1.0 - self.beta2.powi(self.step));
        let (lr, eps) = (F::lit(self.lr), F::lit(self.eps));
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let g = store.grad(id).data.clone();
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            let p = store.value_mut(id);
            for (j, &gj) in g.iter().enumerate() {
                m.data[j] = b1 * m.data[j] + (F::one() - b1) * gj;
                v.data[j] = b2 * v.data[j] + (F::one() - b2) * gj * gj;
                let mh = m.data[j] / c1;
                let vh = v.data[j] / c2;
                p.data[j] = p.data[j] - lr * mh / (vh.sqrt() + eps);
            }
        }
        store.zero_grads();
    }
}
