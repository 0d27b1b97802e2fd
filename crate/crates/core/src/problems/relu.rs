//! Fully connected ReLU regression with absolute loss.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::problem::{spot_check_with, Objective};
use crate::problems::finite_sum::FiniteSumProblem;
use crate::rng::RngStream;
use crate::sampling::fill_unit_sphere;
use crate::vector::Vector;

/// Parameter box `[-R, R]^p` used when estimating component Lipschitz bounds.
pub const RELU_PARAM_BOX: f64 = 2.0;
/// Multiplier applied to the spot-checked constants. Heuristic: the true
/// constants of a deep net are not available in closed form.
pub const RELU_SAFETY_FACTOR: f64 = 2.0;
const LOCAL_PAIRS: usize = 256;
const LOCAL_STEP: f64 = 1e-2;

/// Network shape; `layers[0]` inputs, one output. Parameters are laid out
/// layer by layer as row-major weights followed by biases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReluNet {
    layers: Vec<usize>,
}

impl ReluNet {
    pub fn new(layers: Vec<usize>) -> Result<Self> {
        if layers.len() < 3 {
            return Err(Error::invalid("need input, at least one hidden layer and output"));
        }
        if layers.contains(&0) {
            return Err(Error::invalid("layer sizes must be >= 1"));
        }
        if *layers.last().unwrap() != 1 {
            return Err(Error::invalid("output layer must have size 1"));
        }
        Ok(ReluNet { layers })
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> f64 {
        debug_assert_eq!(params.len(), self.n_params());
        debug_assert_eq!(input.len(), self.layers[0]);
        let mut act = input.to_vec();
        let mut off = 0;
        let last = self.layers.len() - 2;
        for (l, w) in self.layers.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[off..off + n_in * n_out];
            let bias = &params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_out * (n_in + 1);
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let z = row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>() + bias[j];
                next.push(if l == last { z } else { z.max(0.0) });
            }
            act = next;
        }
        act[0]
    }
}

/// Absolute-loss regression on given data. Component bounds come from a local
/// spot-check in the parameter box times `RELU_SAFETY_FACTOR`.
pub fn relu_regression(
    net: ReluNet,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    initial_point: Vector,
    rng: &mut RngStream,
) -> Result<FiniteSumProblem> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::invalid("need matching, nonempty inputs and targets"));
    }
    if inputs.iter().any(|x| x.len() != net.layers[0]) {
        return Err(Error::invalid("input width does not match the network"));
    }
    let p = net.n_params();
    if initial_point.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: initial_point.dim(),
        });
    }
    let net = Arc::new(net);
    let mut comps: Vec<Arc<dyn Objective>> = Vec::with_capacity(inputs.len());
    let mut lips = Vec::with_capacity(inputs.len());
    for (i, (x, y)) in inputs.into_iter().zip(targets).enumerate() {
        let net = net.clone();
        let f = move |theta: &[f64]| (net.forward(theta, &x) - y).abs();
        let mut sub = rng.derive("relu-lipschitz", i as u32);
        lips.push(RELU_SAFETY_FACTOR * local_lipschitz(p, &f, &mut sub));
        comps.push(Arc::new(f));
    }
    if lips.iter().all(|l| *l == 0.0) {
        // degenerate data (e.g. all-zero inputs and targets): nominal bounds
        lips.iter_mut().for_each(|l| *l = 1.0);
    }
    let mut prob = FiniteSumProblem::new("relu-net", comps, lips, initial_point, 1.0)?;
    let gap = prob.mean_value(&prob.initial_point);
    if gap > 0.0 {
        prob.meta.value_gap = gap;
    }
    Ok(prob)
}

fn local_lipschitz(p: usize, f: &impl Fn(&[f64]) -> f64, rng: &mut RngStream) -> f64 {
    let mut x = vec![0.0; p];
    let mut w = vec![0.0; p];
    let mut y = vec![0.0; p];
    let mut best: f64 = 0.0;
    for _ in 0..LOCAL_PAIRS {
        for v in x.iter_mut() {
            *v = rng.random_range(-RELU_PARAM_BOX..=RELU_PARAM_BOX);
        }
        fill_unit_sphere(&mut w, rng);
        for k in 0..p {
            y[k] = x[k] + LOCAL_STEP * w[k];
        }
        best = best.max((f(&x) - f(&y)).abs() / LOCAL_STEP);
    }
    // a few global pairs as well
    let global = spot_check_with(p, 0.0, 64, RELU_PARAM_BOX, rng, f).map(|s| s.max_ratio).unwrap_or(0.0);
    best.max(global)
}

/// Teacher-student regression: inputs uniform in `[-1, 1]^{layers[0]}`, targets
/// from a teacher with parameters uniform in `[-1, 1]`, start uniform in
/// `[-0.5, 0.5]`. The teacher attains zero loss, so the gap `f(theta0)` is exact.
pub fn make_relu_net(layer_sizes: &[usize], dataset_size: usize, rng: &mut RngStream) -> Result<FiniteSumProblem> {
    if dataset_size == 0 {
        return Err(Error::invalid("dataset_size must be >= 1"));
    }
    let net = ReluNet::new(layer_sizes.to_vec())?;
    let p = net.n_params();
    let mut t_rng = rng.derive("relu-teacher", 0);
    let teacher: Vec<f64> = (0..p).map(|_| t_rng.random_range(-1.0..=1.0)).collect();
    let mut x_rng = rng.derive("relu-inputs", 0);
    let inputs: Vec<Vec<f64>> = (0..dataset_size)
        .map(|_| (0..layer_sizes[0]).map(|_| x_rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let targets: Vec<f64> = inputs.iter().map(|x| net.forward(&teacher, x)).collect();
    let mut i_rng = rng.derive("relu-init", 0);
    let theta0: Vec<f64> = (0..p).map(|_| i_rng.random_range(-0.5..=0.5)).collect();
    let mut l_rng = rng.derive("relu-bounds", 0);
    relu_regression(net, inputs, targets, Vector::new(theta0)?, &mut l_rng)?.with_minimizer(Vector::new(teacher)?)
}
