use super::params::{Grads, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction over a fixed subset of a store's parameters.
///
/// Parameters outside the subset are never touched, which is how frozen
/// sub-networks are expressed.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    cfg: AdamConfig,
    ids: Vec<ParamId>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, store: &ParamStore, ids: Vec<ParamId>) -> Self {
        let m: Vec<Vec<f64>> = ids.iter().map(|&id| vec![0.0; store.get(id).len()]).collect();
        Adam { cfg, ids, v: m.clone(), m, step: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn params(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powf(self.step as f64);
        let c2 = 1.0 - beta2.powf(self.step as f64);
        for (k, &id) in self.ids.iter().enumerate() {
            let g = grads.get(id);
            let p = store.get_mut(id);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn store() -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap());
        (s, id)
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let (mut s, id) = store();
        let mut g = Grads::zeros_like(&s);
        g.get_mut(id).copy_from_slice(&[0.3, -40.0, 1e-3]);
        let mut adam = Adam::new(AdamConfig::default(), &s, vec![id]);
        adam.step(&mut s, &g);
        // m_hat = g, v_hat = g², so the update is lr·g/(|g| + eps).
        let expected = [1.0 - 1e-3 * 0.3 / (0.3 + 1e-8), -2.0 + 1e-3 * 40.0 / (40.0 + 1e-8), 0.5 - 1e-3 * 1e-3 / (1e-3 + 1e-8)];
        for (a, b) in s.get(id).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((s.get(id)[0] - (1.0 - 1e-3)).abs() < 1e-10);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let (mut s, id) = store();
        let before = s.clone();
        let g = Grads::zeros_like(&s);
        let mut adam = Adam::new(AdamConfig::default(), &s, vec![id]);
        for _ in 0..5 {
            adam.step(&mut s, &g);
        }
        assert_eq!(s, before);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let (mut s, id) = store();
            let mut g = Grads::zeros_like(&s);
            g.get_mut(id).copy_from_slice(&[0.1, 0.2, -0.3]);
            let mut adam = Adam::new(AdamConfig::default(), &s, vec![id]);
            adam.step(&mut s, &g);
            adam.step(&mut s, &g);
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn parameters_outside_subset_untouched() {
        let mut s = ParamStore::new();
        let a = s.add_const("a", &[2], 1.0);
        let b = s.add_const("b", &[2], 1.0);
        let mut g = Grads::zeros_like(&s);
        g.get_mut(a).fill(1.0);
        g.get_mut(b).fill(1.0);
        Adam::new(AdamConfig::default(), &s, vec![a]).step(&mut s, &g);
        assert_ne!(s.get(a), &[1.0, 1.0]);
        assert_eq!(s.get(b), &[1.0, 1.0]);
    }
}
