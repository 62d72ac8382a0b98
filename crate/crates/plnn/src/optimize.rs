//! Training: Adam on binary cross-entropy for PLNNs, and the deterministic
//! L2-penalized logistic regression solver used by flattening and pruning.

use ndarray::{Array, Array1, Array2, ArrayView1, ArrayView2, Axis, Dimension};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{sigmoid, Layer, Plnn};

/// Hyperparameters for [`train_plnn`].
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Hidden-layer widths, input side first.
    pub architecture: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Multiplier on the Glorot-uniform init bound √(6/(fan_in+fan_out)).
    pub init_scale: f64,
}

impl TrainConfig {
    pub fn new(architecture: Vec<usize>) -> Self {
        TrainConfig {
            architecture,
            learning_rate: 0.02,
            batch_size: 4,
            epochs: 100,
            seed: 0,
            init_scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.architecture.iter().any(|&w| w == 0) {
            return Err(Error::InvalidParameter("hidden widths must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be ≥ 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be ≥ 1".into()));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::InvalidParameter("init scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Adam hyperparameters (the usual defaults).
#[derive(Debug, Clone, Copy)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second-moment state for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState<D: Dimension> {
    m: Array<f64, D>,
    v: Array<f64, D>,
    step: u64,
}

impl<D: Dimension> AdamState<D> {
    pub fn new(shape: D) -> Self {
        AdamState {
            m: Array::zeros(shape.clone()),
            v: Array::zeros(shape),
            step: 0,
        }
    }

    /// One bias-corrected Adam update:
    /// `θ ← θ − lr · m̂ / (√v̂ + ε)`.
    pub fn update(
        &mut self,
        hyper: &Adam,
        params: &mut Array<f64, D>,
        grad: &Array<f64, D>,
    ) -> Result<()> {
        if grad.shape() != params.shape() || grad.shape() != self.m.shape() {
            return Err(Error::InvalidParameter(format!(
                "adam shapes disagree: params {:?}, grad {:?}",
                params.shape(),
                grad.shape()
            )));
        }
        self.step += 1;
        let b1 = hyper.beta1;
        let b2 = hyper.beta2;
        self.m.zip_mut_with(grad, |m, &g| *m = b1 * *m + (1.0 - b1) * g);
        self.v.zip_mut_with(grad, |v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        ndarray::Zip::from(&mut *params)
            .and(&self.m)
            .and(&self.v)
            .for_each(|p, &m, &v| {
                let m_hat = m / c1;
                let v_hat = v / c2;
                *p -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
            });
        Ok(())
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy of logits against 0/1 labels.
pub fn bce_loss(logits: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    logits
        .iter()
        .zip(y.iter())
        .map(|(&z, &t)| softplus(z) - t * z)
        .sum::<f64>()
        / logits.len() as f64
}

/// Glorot-uniform initial network: weights uniform in ±scale·√(6/(fi+fo)),
/// biases zero.
pub fn init_network(input_dim: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Plnn> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(&cfg.architecture);
    dims.push(1);
    let layers = dims
        .windows(2)
        .map(|d| {
            let (fan_in, fan_out) = (d[0], d[1]);
            let s = cfg.init_scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-s..s));
            Layer::new(weights, Array1::zeros(fan_out))
        })
        .collect();
    Plnn::new(layers)
}

/// Train a PLNN of the configured architecture with Adam on mean BCE.
/// Bit-deterministic given (data, cfg): one seeded stream drives init and
/// every epoch's shuffle.
pub fn train_plnn(data: &Dataset, cfg: &TrainConfig) -> Result<Plnn> {
    cfg.validate()?;
    let (n0, n1) = data.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::TrainingData(
            "training needs both classes present".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = init_network(data.num_features(), cfg, &mut rng)?;
    let mut weights: Vec<Array2<f64>> = net.layers().iter().map(|l| l.weights.clone()).collect();
    let mut biases: Vec<Array1<f64>> = net.layers().iter().map(|l| l.bias.clone()).collect();
    let hyper = Adam::new(cfg.learning_rate);
    let mut w_states: Vec<_> = weights
        .iter()
        .map(|w| AdamState::new(w.raw_dim()))
        .collect();
    let mut b_states: Vec<_> = biases.iter().map(|b| AdamState::new(b.raw_dim())).collect();

    let y = data.labels_f64();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = data.x.select(Axis(0), batch);
            let yb = Array1::from_iter(batch.iter().map(|&i| y[i]));
            let (w_grads, b_grads) = backprop(&weights, &biases, xb.view(), yb.view());
            for l in 0..weights.len() {
                w_states[l].update(&hyper, &mut weights[l], &w_grads[l])?;
                b_states[l].update(&hyper, &mut biases[l], &b_grads[l])?;
            }
        }
    }
    let layers = weights
        .into_iter()
        .zip(biases)
        .map(|(w, b)| Layer::new(w, b))
        .collect();
    // Plnn::new re-checks finiteness, turning divergence into an error.
    Plnn::new(layers).map_err(|_| Error::NonFinite("training diverged".into()))
}

/// Mean-BCE gradients for one batch. Returns (∂L/∂W_l, ∂L/∂B_l) per layer.
fn backprop(
    weights: &[Array2<f64>],
    biases: &[Array1<f64>],
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> (Vec<Array2<f64>>, Vec<Array1<f64>>) {
    let n_layers = weights.len();
    let batch = x.nrows() as f64;
    // Forward, keeping each layer's input activation and pre-activation.
    let mut activations = Vec::with_capacity(n_layers);
    let mut preacts = Vec::with_capacity(n_layers);
    let mut a = x.to_owned();
    for l in 0..n_layers {
        activations.push(a.clone());
        let mut z = a.dot(&weights[l].t());
        z += &biases[l];
        a = if l + 1 < n_layers {
            z.mapv(|v| v.max(0.0))
        } else {
            z.clone()
        };
        preacts.push(z);
    }
    // Output delta: (σ(z) − y) / batch, broadcast over the single column.
    let mut delta = preacts[n_layers - 1].clone();
    for (row, &t) in delta.rows_mut().into_iter().zip(y.iter()) {
        let row = row.into_slice().expect("contiguous");
        row[0] = (sigmoid(row[0]) - t) / batch;
    }
    let mut w_grads = vec![Array2::zeros((0, 0)); n_layers];
    let mut b_grads = vec![Array1::zeros(0); n_layers];
    for l in (0..n_layers).rev() {
        w_grads[l] = delta.t().dot(&activations[l]);
        b_grads[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut back = delta.dot(&weights[l]);
            back.zip_mut_with(&preacts[l - 1], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = back;
        }
    }
    (w_grads, b_grads)
}

/// Result of [`logistic_fit`].
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub w: Array1<f64>,
    pub b: f64,
    pub l2: f64,
    pub converged: bool,
    /// Infinity norm of the gradient at the returned point.
    pub grad_norm: f64,
    pub iterations: usize,
    /// Final objective value: mean BCE + (l2/2)·‖w‖².
    pub objective: f64,
}

impl LogisticFit {
    pub fn decision_logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.w) + self.b
    }
}

const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 500;
const MAX_CONDITION: f64 = 1e12;

/// Minimize mean BCE + (l2/2)·‖w‖² (bias unpenalized) by damped Newton
/// (IRLS) with step halving, falling back to gradient descent whenever the
/// Hessian looks ill-conditioned. Deterministic; starts from θ = 0.
pub fn logistic_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, l2: f64) -> Result<LogisticFit> {
    let n = x.nrows();
    let d = x.ncols();
    if n == 0 {
        return Err(Error::TrainingData("no rows to fit".into()));
    }
    if n != y.len() {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logistic design matrix".into()));
    }
    if y.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::TrainingData("labels must be 0 or 1".into()));
    }
    if l2 < 0.0 {
        return Err(Error::InvalidParameter("l2 must be ≥ 0".into()));
    }

    // θ = [w; b], penalty applies to the first d coordinates only.
    let mut theta = Array1::zeros(d + 1);
    let objective = |theta: &Array1<f64>| -> f64 {
        let (w, b) = (theta.slice(ndarray::s![..d]), theta[d]);
        let z = x.dot(&w) + b;
        bce_loss(z.view(), y) + 0.5 * l2 * w.dot(&w)
    };
    let grad_at = |theta: &Array1<f64>| -> (Array1<f64>, Array1<f64>) {
        let (w, b) = (theta.slice(ndarray::s![..d]), theta[d]);
        let z = x.dot(&w) + b;
        let p = z.mapv(sigmoid);
        let r = (&p - &y) / n as f64;
        let mut g = Array1::zeros(d + 1);
        g.slice_mut(ndarray::s![..d]).assign(&(x.t().dot(&r) + &(l2 * &w)));
        g[d] = r.sum();
        (g, p)
    };

    let mut f = objective(&theta);
    let mut iterations = 0;
    for _ in 0..MAX_ITER {
        let (g, p) = grad_at(&theta);
        if g.iter().fold(0.0f64, |m, &v| m.max(v.abs())) < GRAD_TOL {
            break;
        }
        iterations += 1;

        // Newton direction from the penalized Hessian, if well-conditioned.
        let direction = newton_direction(x, &p, &g, l2, n, d);
        let mut step_ok = false;
        for dir in [direction, Some(-&g)].into_iter().flatten() {
            let mut t = 1.0;
            for _ in 0..60 {
                let cand = &theta + &(t * &dir);
                let f_cand = objective(&cand);
                if f_cand < f {
                    theta = cand;
                    f = f_cand;
                    step_ok = true;
                    break;
                }
                t *= 0.5;
            }
            if step_ok {
                break;
            }
        }
        if !step_ok {
            // No descent in either direction: numerically at a minimum.
            break;
        }
    }
    let (g, _) = grad_at(&theta);
    let grad_norm = g.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    Ok(LogisticFit {
        w: theta.slice(ndarray::s![..d]).to_owned(),
        b: theta[d],
        l2,
        converged: grad_norm < GRAD_TOL,
        grad_norm,
        iterations,
        objective: f,
    })
}

/// `−H⁻¹ g` for the penalized logistic Hessian, or `None` when the
/// Cholesky factor fails or its diagonal spread implies cond > 1e12.
fn newton_direction(
    x: ArrayView2<f64>,
    p: &Array1<f64>,
    g: &Array1<f64>,
    l2: f64,
    n: usize,
    d: usize,
) -> Option<Array1<f64>> {
    // H = X̃ᵀ S X̃ / n + l2·diag(1…1,0), with X̃ = [X | 1], S = diag(p(1−p)).
    let mut h = Array2::zeros((d + 1, d + 1));
    for (i, row) in x.rows().into_iter().enumerate() {
        let s = p[i] * (1.0 - p[i]) / n as f64;
        if s == 0.0 {
            continue;
        }
        for a in 0..d {
            let xa = row[a];
            for b in a..d {
                h[[a, b]] += s * xa * row[b];
            }
            h[[a, d]] += s * xa;
        }
        h[[d, d]] += s;
    }
    for a in 0..d {
        h[[a, a]] += l2;
        for b in a + 1..=d {
            h[[b, a]] = h[[a, b]];
        }
    }
    let l = cholesky(&h)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..=d {
        lo = lo.min(l[[i, i]]);
        hi = hi.max(l[[i, i]]);
    }
    // cond(H) ≈ (max diag L / min diag L)².
    if lo <= 0.0 || (hi / lo).powi(2) > MAX_CONDITION {
        return None;
    }
    Some(-chol_solve(&l, g))
}

/// Lower-triangular Cholesky factor, or `None` if not positive definite.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solve `L Lᵀ x = rhs` by forward then backward substitution.
fn chol_solve(l: &Array2<f64>, rhs: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}
