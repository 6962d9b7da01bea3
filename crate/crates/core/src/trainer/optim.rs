use super::TrialConfig;

/// Linear warmup from zero over `warmup_steps`, then constant.
pub fn warmup_constant_lr(base: f64, warmup_steps: usize, step: usize) -> f64 {
    if step < warmup_steps {
        base * step as f64 / warmup_steps as f64
    } else {
        base
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(n_params: usize, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self { beta1, beta2, eps, weight_decay, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn from_config(n_params: usize, cfg: &TrialConfig) -> Self {
        Self::new(n_params, cfg.optimizer_beta1, cfg.optimizer_beta2, cfg.optimizer_eps, cfg.weight_decay)
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.t = self.t.saturating_add(1);
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * *p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_then_constant() {
        assert_eq!(warmup_constant_lr(1.0, 4, 0), 0.0);
        assert_eq!(warmup_constant_lr(1.0, 4, 2), 0.5);
        assert_eq!(warmup_constant_lr(1.0, 4, 4), 1.0);
        assert_eq!(warmup_constant_lr(1.0, 4, 400), 1.0);
        assert_eq!(warmup_constant_lr(0.3, 0, 0), 0.3);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // bias-corrected first step is lr * sign(g) when eps is negligible
        let mut opt = AdamW::new(2, 0.9, 0.999, 1e-12, 0.0);
        let mut p = vec![1.0, -1.0];
        opt.step(&mut p, &[0.5, -2.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-9);
        assert!((p[1] + 0.9).abs() < 1e-9);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut opt = AdamW::new(1, 0.9, 0.999, 1e-8, 0.0);
        let mut p = vec![5.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 1.5)];
            opt.step(&mut p, &g, 0.05);
        }
        assert!((p[0] - 1.5).abs() < 1e-2);
    }

    #[test]
    fn decay_shrinks_without_gradient() {
        let mut opt = AdamW::new(1, 0.9, 0.999, 1e-8, 0.1);
        let mut p = vec![2.0];
        opt.step(&mut p, &[0.0], 0.5);
        assert!((p[0] - 1.9).abs() < 1e-12);
    }
}
