use ndarray::Array2;

use super::params::ParamStore;

/// Bias-corrected Adam over every parameter in a store.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros = || {
            store
                .ids()
                .map(|id| Array2::zeros(store.value(id).raw_dim()))
                .collect()
        };
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the store's current gradients.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let k = id.index();
            let grad = store.grad(id).clone();
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            m.zip_mut_with(&grad, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(&grad, |v, &g| {
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g
            });
            let value = store.value_mut(id);
            ndarray::Zip::from(value)
                .and(&*m)
                .and(&*v)
                .for_each(|w, &m, &v| {
                    *w -= self.lr * (m / c1) / ((v / c2).sqrt() + self.eps);
                });
        }
    }
}
