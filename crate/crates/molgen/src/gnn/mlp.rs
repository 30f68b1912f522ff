//! Dense matrices and the two-layer perceptron used for the state and
//! output networks: tanh hidden layer, linear output.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn uniform<R: Rng>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out = W x`
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = 0.0;
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            *o = acc;
        }
    }

    /// `out += Wᵀ y`
    pub fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &yv) in y.iter().enumerate() {
            if yv == 0.0 {
                continue;
            }
            let row = self.row(r);
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * yv;
            }
        }
    }

    /// `W += y xᵀ`
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, &yv) in y.iter().enumerate() {
            if yv == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, xv) in row.iter_mut().zip(x) {
                *w += yv * xv;
            }
        }
    }
}

/// Two-layer perceptron: `y = W2 tanh(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl Mlp {
    /// Uniform init in ±1/sqrt(fan_in) per layer.
    pub fn init<R: Rng>(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        let r1 = 1.0 / (in_dim as f64).sqrt();
        let r2 = 1.0 / (hidden as f64).sqrt();
        Mlp {
            w1: Matrix::uniform(hidden, in_dim, r1, rng),
            b1: (0..hidden).map(|_| rng.random_range(-r1..r1)).collect(),
            w2: Matrix::uniform(out_dim, hidden, r2, rng),
            b2: (0..out_dim).map(|_| rng.random_range(-r2..r2)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            w1: Matrix::zeros(self.w1.rows, self.w1.cols),
            b1: vec![0.0; self.b1.len()],
            w2: Matrix::zeros(self.w2.rows, self.w2.cols),
            b2: vec![0.0; self.b2.len()],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows
    }

    pub fn out_dim(&self) -> usize {
        self.w2.rows
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.w1.rows == other.w1.rows
            && self.w1.cols == other.w1.cols
            && self.w2.rows == other.w2.rows
            && self.w2.cols == other.w2.cols
    }

    /// Returns the output and the post-tanh hidden activations the backward
    /// pass needs.
    pub fn forward(&self, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        self.w1.matvec(x, hidden);
        for (h, b) in hidden.iter_mut().zip(&self.b1) {
            *h = (*h + b).tanh();
        }
        self.w2.matvec(hidden, out);
        for (o, b) in out.iter_mut().zip(&self.b2) {
            *o += b;
        }
    }

    /// Accumulates parameter gradients for one application and, when
    /// requested, adds the input gradient into `dx`.
    pub fn backward(
        &self,
        x: &[f64],
        hidden: &[f64],
        dy: &[f64],
        grads: &mut Mlp,
        dx: Option<&mut [f64]>,
    ) {
        grads.w2.add_outer(dy, hidden);
        for (g, d) in grads.b2.iter_mut().zip(dy) {
            *g += d;
        }
        let mut dh = vec![0.0; self.hidden_dim()];
        self.w2.matvec_t_add(dy, &mut dh);
        for (d, h) in dh.iter_mut().zip(hidden) {
            *d *= 1.0 - h * h;
        }
        grads.w1.add_outer(&dh, x);
        for (g, d) in grads.b1.iter_mut().zip(&dh) {
            *g += d;
        }
        if let Some(dx) = dx {
            self.w1.matvec_t_add(&dh, dx);
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.data.len() + self.b1.len() + self.w2.data.len() + self.b2.len()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .data
            .iter()
            .chain(&self.b1)
            .chain(&self.w2.data)
            .chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .data
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.data.iter_mut())
            .chain(self.b2.iter_mut())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_matches_hand_computation() {
        // 1-2-1 net with fixed weights.
        let mlp = Mlp {
            w1: Matrix {
                rows: 2,
                cols: 1,
                data: vec![1.0, -2.0],
            },
            b1: vec![0.5, 0.0],
            w2: Matrix {
                rows: 1,
                cols: 2,
                data: vec![3.0, 1.0],
            },
            b2: vec![-1.0],
        };
        let x = [2.0];
        let mut h = [0.0; 2];
        let mut y = [0.0];
        mlp.forward(&x, &mut h, &mut y);
        let h0 = (2.0f64 + 0.5).tanh();
        let h1 = (-4.0f64).tanh();
        assert!((y[0] - (3.0 * h0 + h1 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::init(4, 5, 3, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Loss = sum of outputs, so dy = ones.
        let loss = |m: &Mlp| {
            let mut h = vec![0.0; 5];
            let mut y = vec![0.0; 3];
            m.forward(&x, &mut h, &mut y);
            y.iter().sum::<f64>()
        };
        let mut h = vec![0.0; 5];
        let mut y = vec![0.0; 3];
        mlp.forward(&x, &mut h, &mut y);
        let mut grads = mlp.zeros_like();
        let mut dx = vec![0.0; 4];
        mlp.backward(&x, &h, &[1.0, 1.0, 1.0], &mut grads, Some(&mut dx));

        let eps = 1e-6;
        let mut m = mlp.clone();
        let n = m.param_count();
        for i in 0..n {
            let orig = *m.params().nth(i).unwrap();
            *m.params_mut().nth(i).unwrap() = orig + eps;
            let up = loss(&m);
            *m.params_mut().nth(i).unwrap() = orig - eps;
            let down = loss(&m);
            *m.params_mut().nth(i).unwrap() = orig;
            let fd = (up - down) / (2.0 * eps);
            let analytic = *grads.params().nth(i).unwrap();
            assert!(
                (fd - analytic).abs() < 1e-7 * analytic.abs().max(1.0),
                "param {i}: fd {fd} vs analytic {analytic}"
            );
        }
    }
}
