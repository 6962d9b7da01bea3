use rand::Rng;

/// K-way linear classifier. Parameters are stored flat: weights
/// row-major (`k x dim`), then biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    k: usize,
    dim: usize,
    params: Vec<f64>,
    grads: Vec<f64>,
}

impl LinearHead {
    pub fn new<R: Rng>(k: usize, dim: usize, rng: &mut R) -> Self {
        let a = 1.0 / (dim.max(1) as f64).sqrt();
        let mut params = vec![0.0; k * dim + k];
        for w in &mut params[..k * dim] {
            *w = rng.gen_range(-a..a);
        }
        Self { k, dim, grads: vec![0.0; params.len()], params }
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.params.split_at(self.k * self.dim);
        (0..self.k)
            .map(|c| b[c] + w[c * self.dim..(c + 1) * self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Accumulate gradients for input `x` given d(loss)/d(logits); returns d(loss)/d(x).
    pub fn backward(&mut self, x: &[f64], g_logits: &[f64]) -> Vec<f64> {
        let kd = self.k * self.dim;
        let mut g_x = vec![0.0; self.dim];
        for (c, &g) in g_logits.iter().enumerate() {
            let row = c * self.dim..(c + 1) * self.dim;
            for ((gw, xi), (w, gx)) in self.grads[row.clone()].iter_mut().zip(x).zip(self.params[row].iter().zip(&mut g_x)) {
                *gw += g * xi;
                *gx += g * w;
            }
            self.grads[kd + c] += g;
        }
        g_x
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn params_and_grads(&mut self) -> (&mut [f64], &[f64]) {
        (&mut self.params, &self.grads)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }
}
