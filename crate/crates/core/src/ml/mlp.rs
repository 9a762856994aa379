// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Prediction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Multiplies the balancing weight N_neg/N_pos given to positive rows.
    pub positive_weight_scale: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 64,
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 200,
            positive_weight_scale: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// d -> hidden (ReLU) -> 1 (sigmoid). `w1` is hidden x d, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpModel {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// -w [y ln s(z) + (1-y) ln(1-s(z))], evaluated without forming s(z).
fn weighted_bce(z: f64, y: u8, w: f64) -> f64 {
    w * if y == 1 { softplus(-z) } else { softplus(z) }
}

impl MlpModel {
    pub fn zeros(d: usize, hidden: usize) -> Self {
        MlpModel { w1: vec![vec![0.0; d]; hidden], b1: vec![0.0; hidden], w2: vec![0.0; hidden], b2: 0.0 }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(d: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut m = MlpModel::zeros(d, hidden);
        let a1 = (6.0 / (d + hidden) as f64).sqrt();
        for row in &mut m.w1 {
            row.iter_mut().for_each(|w| *w = rng.gen_range(-a1..=a1));
        }
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        m.w2.iter_mut().for_each(|w| *w = rng.gen_range(-a2..=a2));
        m
    }

    pub fn dimension(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let z1 = self.hidden_pre(x);
        self.b2 + z1.iter().zip(&self.w2).map(|(z, w)| z.max(0.0) * w).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let score = sigmoid(self.logit(x));
        Prediction { label: (score > 0.5) as u8, score }
    }

    /// Mean weighted cross-entropy over the batch; `class_weight` is
    /// indexed by the label.
    pub fn loss(&self, xs: &[&[f64]], ys: &[u8], class_weight: [f64; 2]) -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| weighted_bce(self.logit(x), y, class_weight[y as usize]))
            .sum::<f64>()
            / xs.len() as f64
    }

    pub fn loss_and_grad(&self, xs: &[&[f64]], ys: &[u8], class_weight: [f64; 2]) -> (f64, MlpGrad) {
        let (d, h) = (self.dimension(), self.hidden());
        let mut g = MlpGrad { w1: vec![vec![0.0; d]; h], b1: vec![0.0; h], w2: vec![0.0; h], b2: 0.0 };
        let inv_n = 1.0 / xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let w = class_weight[y as usize];
            let z1 = self.hidden_pre(x);
            let z2 = self.b2 + z1.iter().zip(&self.w2).map(|(z, w)| z.max(0.0) * w).sum::<f64>();
            loss += weighted_bce(z2, y, w) * inv_n;
            let dz2 = w * (sigmoid(z2) - y as f64) * inv_n;
            g.b2 += dz2;
            for k in 0..h {
                if z1[k] > 0.0 {
                    g.w2[k] += dz2 * z1[k];
                    let dz1 = dz2 * self.w2[k];
                    g.b1[k] += dz1;
                    for (gw, v) in g.w1[k].iter_mut().zip(x.iter()) {
                        *gw += dz1 * v;
                    }
                }
            }
        }
        (loss, g)
    }

    /// Parameter `k` in the order w1 (row-major), b1, w2, b2.
    fn param_mut(&mut self, k: usize) -> &mut f64 {
        let (d, h) = (self.dimension(), self.hidden());
        if k < h * d {
            &mut self.w1[k / d][k % d]
        } else if k < h * d + h {
            &mut self.b1[k - h * d]
        } else if k < h * d + 2 * h {
            &mut self.w2[k - h * d - h]
        } else {
            &mut self.b2
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .flatten()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(std::iter::once(&mut self.b2))
    }
}

impl MlpGrad {
    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1
            .iter()
            .flatten()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
            .copied()
    }
}

/// Largest relative disagreement between the analytic gradient and central
/// differences with step 1e-4, `|ga - gn| / max(1e-8, |ga| + |gn|)`.
pub fn gradient_check(model: &MlpModel, xs: &[&[f64]], ys: &[u8], class_weight: [f64; 2]) -> f64 {
    const STEP: f64 = 1e-4;
    let (_, grad) = model.loss_and_grad(xs, ys, class_weight);
    let analytic: Vec<f64> = grad.values().collect();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (k, &ga) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(k);
        *probe.param_mut(k) = orig + STEP;
        let up = probe.loss(xs, ys, class_weight);
        *probe.param_mut(k) = orig - STEP;
        let down = probe.loss(xs, ys, class_weight);
        *probe.param_mut(k) = orig;
        let gn = (up - down) / (2.0 * STEP);
        worst = worst.max((ga - gn).abs() / (ga.abs() + gn.abs()).max(1e-8));
    }
    worst
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, model: &mut MlpModel, grad: &MlpGrad, p: &MlpParams) {
        self.t += 1;
        let c1 = 1.0 - p.beta1.powi(self.t);
        let c2 = 1.0 - p.beta2.powi(self.t);
        for (((w, g), m), v) in model.params_mut().zip(grad.values()).zip(&mut self.m).zip(&mut self.v) {
            *m = p.beta1 * *m + (1.0 - p.beta1) * g;
            *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
            *w -= p.learning_rate * (*m / c1) / ((*v / c2).sqrt() + p.epsilon);
        }
    }
}

/// Mini-batch Adam on standardized rows; labels must contain both classes.
pub fn fit_mlp(rows: &[Vec<f64>], labels: &[u8], params: &MlpParams, rng: &mut ChaCha8Rng) -> MlpModel {
    let d = rows[0].len();
    let mut model = MlpModel::init(d, params.hidden, rng);
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let class_weight = [1.0, params.positive_weight_scale * neg / pos];
    let n_params = params.hidden * (d + 2) + 1;
    let mut adam = Adam { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 };
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for _ in 0..params.epochs {
        order.shuffle(rng);
        for batch in order.chunks(params.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| rows[i].as_slice()).collect();
            let ys: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
            let (_, g) = model.loss_and_grad(&xs, &ys, class_weight);
            adam.step(&mut model, &g, params);
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
        let ys = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        (xs, ys)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = MlpModel::init(5, 4, &mut rng);
        let (xs, ys) = batch(&mut rng, 9, 5);
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        assert!(gradient_check(&m, &refs, &ys, [1.0, 2.5]) < 1e-5);
    }

    #[test]
    fn zero_net_bias_gradient() {
        let m = MlpModel::zeros(3, 2);
        let xs = [[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]];
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let ys = [1, 0];
        let (loss, g) = m.loss_and_grad(&refs, &ys, [1.0, 1.0]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        // sigmoid(0) - y averages to zero on a balanced batch
        assert!(g.b2.abs() < 1e-15);
        assert!(gradient_check(&m, &refs, &ys, [1.0, 1.0]) < 1e-5);
    }

    #[test]
    fn ln2_per_sample_at_half() {
        let m = MlpModel::zeros(2, 3);
        let xs = [[0.3, 0.1]; 4];
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let loss = m.loss(&refs, &[1, 0, 0, 1], [1.0, 1.0]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(m.predict(&[5.0, 5.0]).label, 0);
    }

    #[test]
    fn separable_toy_set_learned() {
        // 16 points on a 4x4 lattice split by x + y > 0
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                let (x, y) = (i as f64 - 1.5, j as f64 - 1.2);
                rows.push(vec![x, y]);
                labels.push((x + y > 0.0) as u8);
            }
        }
        let p = MlpParams { hidden: 8, epochs: 500, ..Default::default() };
        let m = fit_mlp(&rows, &labels, &p, &mut ChaCha8Rng::seed_from_u64(5));
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(m.predict(r).label, l);
        }
    }

    #[test]
    fn stable_loss_for_large_logits() {
        assert_eq!(weighted_bce(800.0, 1, 1.0), 0.0);
        assert!((weighted_bce(-800.0, 1, 2.0) - 1600.0).abs() < 1e-9);
        assert_eq!(sigmoid(-800.0), 0.0);
    }
}
