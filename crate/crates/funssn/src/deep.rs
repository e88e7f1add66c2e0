//! The deep model part: dense trunks in two arrangements (shared
//! encoder/decoder, or a generic net on raw discretized inputs) and a
//! discretized functional layer.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::structured::encode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation value.
    fn derivative(&self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Dense trunk between the structured encoder (sum of K_j inputs) and
    /// the shared outcome decoder (U latent outputs).
    SharedCodec,
    /// Dense trunk on concatenated raw inputs (J*R) ending in Q units.
    Generic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeepConfig {
    pub architecture: Architecture,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl DeepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::invalid("hidden sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout rate must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    /// out x in.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// A dense trunk with per-batch dropout masks cached for the backward
/// pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeepNet {
    pub config: DeepConfig,
    pub layers: Vec<DenseLayer>,
    pub input_dim: usize,
    pub output_dim: usize,
}

/// Cached forward state consumed by `backward`.
pub struct ForwardCache {
    /// Input to each layer (n x in_l).
    layer_inputs: Vec<Array2<f64>>,
    /// Pre-activation values of each layer (n x out_l).
    pre_activations: Vec<Array2<f64>>,
    /// Inverted-dropout masks applied after each non-final layer (empty
    /// when evaluating).
    masks: Vec<Option<Array2<f64>>>,
    batch_rows: usize,
}

impl DeepNet {
    /// Glorot-uniform weights, zero biases, deterministic under the
    /// config seed. Trunk layers use the configured activation; the final
    /// layer is linear.
    pub fn init(config: DeepConfig, input_dim: usize, output_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::invalid("deep net needs positive in/out dims"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(&config.hidden_sizes);
        dims.push(output_dim);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights =
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-bound..=bound));
            let is_last = layers.len() == dims.len() - 2;
            layers.push(DenseLayer {
                weights,
                bias: Array1::zeros(fan_out),
                activation: if is_last {
                    Activation::Identity
                } else {
                    config.activation
                },
            });
        }
        Ok(DeepNet {
            config,
            layers,
            input_dim,
            output_dim,
        })
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Forward pass; with `training` set, dropout masks are sampled from
    /// `rng` after every non-final layer and recorded in the cache.
    pub fn forward(
        &self,
        inputs: &Array2<f64>,
        training: bool,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        if inputs.ncols() != self.input_dim {
            return Err(Error::invalid(format!(
                "deep input has {} columns, expected {}",
                inputs.ncols(),
                self.input_dim
            )));
        }
        let use_dropout = training && self.config.dropout_rate > 0.0;
        let mut local_rng;
        let rng = if use_dropout {
            match rng {
                Some(r) => Some(r),
                None => {
                    local_rng = ChaCha8Rng::seed_from_u64(self.config.seed);
                    Some(&mut local_rng)
                }
            }
        } else {
            None
        };
        let mut rng = rng;

        let mut cache = ForwardCache {
            layer_inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
            batch_rows: inputs.nrows(),
        };
        let mut current = inputs.clone();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            cache.layer_inputs.push(current.clone());
            let pre = current.dot(&layer.weights.t()) + &layer.bias;
            cache.pre_activations.push(pre.clone());
            let mut act = pre.mapv(|v| layer.activation.apply(v));
            let mask = if idx < last {
                if let Some(ref mut r) = rng {
                    let keep = 1.0 - self.config.dropout_rate;
                    let mask = Array2::from_shape_fn(act.dim(), |_| {
                        if r.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    act *= &mask;
                    Some(mask)
                } else {
                    None
                }
            } else {
                None
            };
            cache.masks.push(mask);
            current = act;
        }
        Ok((current, cache))
    }

    /// Reverse accumulation through the cached forward state. Returns
    /// per-layer (weight, bias) gradients of `sum(upstream * output)`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
    ) -> Result<Vec<(Array2<f64>, Array1<f64>)>> {
        if upstream.nrows() != cache.batch_rows || upstream.ncols() != self.output_dim {
            return Err(Error::ContractViolation(
                "upstream shape does not match the cached forward pass".to_string(),
            ));
        }
        if cache.layer_inputs.len() != self.layers.len() {
            return Err(Error::ContractViolation(
                "forward cache does not match this network".to_string(),
            ));
        }
        let mut grads = vec![(Array2::zeros((0, 0)), Array1::zeros(0)); self.layers.len()];
        let mut delta = upstream.clone();
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            // gradient flows through the dropout mask first
            if let Some(mask) = &cache.masks[idx] {
                delta *= mask;
            }
            let pre = &cache.pre_activations[idx];
            let dact = pre.mapv(|v| layer.activation.derivative(v));
            delta *= &dact;
            let grad_w = delta.t().dot(&cache.layer_inputs[idx]);
            let grad_b = delta.sum_axis(Axis(0));
            if idx > 0 {
                delta = delta.dot(&layer.weights);
            }
            grads[idx] = (grad_w, grad_b);
        }
        Ok(grads)
    }
}

/// One discretized functional layer: every output neuron integrates each
/// input curve against a tensor-product weight surface, adds a decoded
/// bias curve, and applies the activation pointwise.
#[derive(Debug, Clone)]
pub struct FunctionalLayer {
    pub in_grid: Grid,
    pub out_grid: Grid,
    pub in_basis: Arc<BasisSystem>,
    pub out_basis: Arc<BasisSystem>,
    /// coeffs[k][m] is U x K for input neuron m feeding output neuron k.
    pub coeffs: Vec<Vec<Array2<f64>>>,
    /// Bias coefficients per output neuron (length U).
    pub bias: Vec<Array1<f64>>,
    pub activation: Activation,
}

impl FunctionalLayer {
    pub fn num_inputs(&self) -> usize {
        self.coeffs.first().map_or(0, |row| row.len())
    }

    pub fn num_outputs(&self) -> usize {
        self.coeffs.len()
    }

    /// Maps `M_in` curves on the in-grid to `M_out` curves on the
    /// out-grid. `inputs` is M_in x R_in; the result is M_out x R_out.
    pub fn forward(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        if inputs.nrows() != self.num_inputs() {
            return Err(Error::invalid(format!(
                "{} input curves for a layer with {} input neurons",
                inputs.nrows(),
                self.num_inputs()
            )));
        }
        if inputs.ncols() != self.in_grid.len() {
            return Err(Error::invalid("input curves do not match the in-grid"));
        }
        let u = self.out_basis.num_basis();
        let psi = self.out_basis.eval_matrix(); // U x R_out
        let encoded: Vec<Array1<f64>> = inputs
            .rows()
            .into_iter()
            .map(|row| encode(row.as_slice().unwrap(), &self.in_grid, &self.in_basis))
            .collect::<Result<_>>()?;

        let mut out = Array2::zeros((self.num_outputs(), self.out_grid.len()));
        for (k, coeff_row) in self.coeffs.iter().enumerate() {
            let mut latent = self.bias[k].clone();
            if latent.len() != u {
                return Err(Error::invalid("bias coefficients do not match out basis"));
            }
            for (m, theta) in coeff_row.iter().enumerate() {
                latent += &theta.dot(&encoded[m]);
            }
            let curve = latent.dot(psi);
            for (r, v) in curve.iter().enumerate() {
                out[[k, r]] = self.activation.apply(*v);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::arr2;

    fn config(arch: Architecture, hidden: Vec<usize>) -> DeepConfig {
        DeepConfig {
            architecture: arch,
            hidden_sizes: hidden,
            activation: Activation::Relu,
            dropout_rate: 0.0,
            seed: 42,
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let c = config(Architecture::Generic, vec![8, 8]);
        let a = DeepNet::init(c.clone(), 10, 5).unwrap();
        let b = DeepNet::init(c, 10, 5).unwrap();
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            assert_eq!(la.weights, lb.weights);
            assert!(la.bias.iter().all(|&v| v == 0.0));
            let bound = (6.0 / (la.weights.ncols() + la.weights.nrows()) as f64).sqrt();
            assert!(la.weights.iter().all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn zero_hidden_layers_is_single_linear_map() {
        let net = DeepNet::init(config(Architecture::Generic, vec![]), 6, 4).unwrap();
        assert_eq!(net.layers.len(), 1);
        assert_eq!(net.layers[0].weights.dim(), (4, 6));
        assert_eq!(net.layers[0].activation, Activation::Identity);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut net = DeepNet::init(config(Architecture::Generic, vec![5]), 4, 3).unwrap();
        for l in &mut net.layers {
            l.weights.fill(0.0);
        }
        let x = Array2::from_elem((2, 4), 1.5);
        let (y, _) = net.forward(&x, false, None).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_hand_computation() {
        // 2-2-1 net with identity activations, hand-checked
        let mut net = DeepNet::init(
            DeepConfig {
                architecture: Architecture::Generic,
                hidden_sizes: vec![2],
                activation: Activation::Identity,
                dropout_rate: 0.0,
                seed: 0,
            },
            2,
            1,
        )
        .unwrap();
        net.layers[0].weights = arr2(&[[1.0, 2.0], [-1.0, 0.5]]);
        net.layers[0].bias = ndarray::arr1(&[0.1, -0.2]);
        net.layers[1].weights = arr2(&[[3.0, 1.0]]);
        net.layers[1].bias = ndarray::arr1(&[0.5]);
        let x = arr2(&[[1.0, -1.0]]);
        // h = (1*1 + 2*(-1) + 0.1, -1*1 + 0.5*(-1) - 0.2) = (-0.9, -1.7)
        // y = 3*(-0.9) + 1*(-1.7) + 0.5 = -3.9
        let (y, _) = net.forward(&x, false, None).unwrap();
        assert_relative_eq!(y[[0, 0]], -3.9, epsilon = 1e-12);
    }

    #[test]
    fn identity_net_is_linear_in_input() {
        let net = DeepNet::init(
            DeepConfig {
                architecture: Architecture::Generic,
                hidden_sizes: vec![6, 5],
                activation: Activation::Identity,
                dropout_rate: 0.0,
                seed: 3,
            },
            4,
            3,
        )
        .unwrap();
        let a = Array2::from_shape_fn((2, 4), |(i, j)| (i + 2 * j) as f64 * 0.3 - 0.5);
        let b = Array2::from_shape_fn((2, 4), |(i, j)| (3 * i + j) as f64 * 0.1 + 0.2);
        let (alpha, beta) = (1.3, -0.4);
        let combo = &(alpha * &a) + &(beta * &b);
        let (fa, _) = net.forward(&a, false, None).unwrap();
        let (fb, _) = net.forward(&b, false, None).unwrap();
        let (fc, _) = net.forward(&combo, false, None).unwrap();
        // linear up to the bias terms, which drop out of the combination
        // only when alpha + beta = 1; use the bias-free check instead
        let zeros = Array2::zeros((2, 4));
        let (f0, _) = net.forward(&zeros, false, None).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let lhs = fc[[i, j]] - f0[[i, j]];
                let rhs = alpha * (fa[[i, j]] - f0[[i, j]]) + beta * (fb[[i, j]] - f0[[i, j]]);
                assert_relative_eq!(lhs, rhs, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn eval_mode_is_deterministic_despite_dropout_config() {
        let net = DeepNet::init(
            DeepConfig {
                architecture: Architecture::Generic,
                hidden_sizes: vec![8],
                activation: Activation::Relu,
                dropout_rate: 0.5,
                seed: 9,
            },
            5,
            3,
        )
        .unwrap();
        let x = Array2::from_shape_fn((4, 5), |(i, j)| ((i * 5 + j) as f64).sin());
        let (y1, _) = net.forward(&x, false, None).unwrap();
        let (y2, _) = net.forward(&x, false, None).unwrap();
        assert_eq!(y1, y2);
    }

    #[test]
    fn backward_zero_upstream() {
        let net = DeepNet::init(config(Architecture::Generic, vec![4]), 3, 2).unwrap();
        let x = Array2::from_elem((2, 3), 0.5);
        let (_, cache) = net.forward(&x, false, None).unwrap();
        let grads = net.backward(&cache, &Array2::zeros((2, 2))).unwrap();
        for (gw, gb) in grads {
            assert!(gw.iter().all(|&v| v == 0.0));
            assert!(gb.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut net = DeepNet::init(
            DeepConfig {
                architecture: Architecture::Generic,
                hidden_sizes: vec![4, 3],
                activation: Activation::Tanh,
                dropout_rate: 0.0,
                seed: 17,
            },
            3,
            2,
        )
        .unwrap();
        // move biases off zero so their gradients are informative
        for l in &mut net.layers {
            l.bias.mapv_inplace(|_| 0.05);
        }
        let x = Array2::from_shape_fn((4, 3), |(i, j)| ((i + j) as f64 * 0.37).sin());
        let upstream = Array2::from_shape_fn((4, 2), |(i, j)| ((i * 2 + j) as f64 * 0.61).cos());
        let (_, cache) = net.forward(&x, false, None).unwrap();
        let grads = net.backward(&cache, &upstream).unwrap();

        let objective = |net: &DeepNet| {
            let (y, _) = net.forward(&x, false, None).unwrap();
            (&y * &upstream).sum()
        };
        let h = 1e-5;
        for li in 0..net.layers.len() {
            let (rows, cols) = net.layers[li].weights.dim();
            for r in 0..rows {
                for c in 0..cols {
                    let mut plus = net.clone();
                    plus.layers[li].weights[[r, c]] += h;
                    let mut minus = net.clone();
                    minus.layers[li].weights[[r, c]] -= h;
                    let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                    assert_relative_eq!(
                        grads[li].0[[r, c]],
                        fd,
                        max_relative = 1e-5,
                        epsilon = 1e-9
                    );
                }
                let mut plus = net.clone();
                plus.layers[li].bias[r] += h;
                let mut minus = net.clone();
                minus.layers[li].bias[r] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                assert_relative_eq!(grads[li].1[r], fd, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn identity_net_gradient_equals_linear_model_gradient() {
        // single linear layer: grad_W of sum(U o (XW^T + b)) is U^T X
        let net = DeepNet::init(config(Architecture::Generic, vec![]), 3, 2).unwrap();
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64) - (j as f64) * 0.5);
        let upstream = Array2::from_shape_fn((5, 2), |(i, j)| (i + j) as f64 * 0.2 - 0.3);
        let (_, cache) = net.forward(&x, false, None).unwrap();
        let grads = net.backward(&cache, &upstream).unwrap();
        let closed_form = upstream.t().dot(&x);
        for (g, c) in grads[0].0.iter().zip(closed_form.iter()) {
            assert_relative_eq!(g, c, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = config(Architecture::Generic, vec![0]);
        assert!(DeepNet::init(c.clone(), 3, 2).is_err());
        c.hidden_sizes = vec![4];
        c.dropout_rate = 1.0;
        assert!(DeepNet::init(c, 3, 2).is_err());
    }

    fn constant_basis_layer(c: f64) -> FunctionalLayer {
        let in_grid = Grid::uniform(0.0, 1.0, 9).unwrap();
        let out_grid = Grid::uniform(0.0, 1.0, 7).unwrap();
        let in_basis = Arc::new(BasisSystem::bspline(&in_grid, 1, 0).unwrap());
        let out_basis = Arc::new(BasisSystem::bspline(&out_grid, 1, 0).unwrap());
        FunctionalLayer {
            in_grid,
            out_grid,
            in_basis,
            out_basis,
            coeffs: vec![vec![Array2::from_elem((1, 1), c)]],
            bias: vec![Array1::zeros(1)],
            activation: Activation::Identity,
        }
    }

    #[test]
    fn functional_layer_zero_coefficients() {
        let mut layer = constant_basis_layer(0.0);
        layer.coeffs[0][0].fill(0.0);
        let inputs = Array2::from_elem((1, 9), 2.0);
        let out = layer.forward(&inputs).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn functional_layer_k1_u1_constant() {
        let c = 1.75;
        let layer = constant_basis_layer(c);
        let inputs = Array2::from_elem((1, 9), 1.0);
        let out = layer.forward(&inputs).unwrap();
        for v in out.iter() {
            assert_relative_eq!(v, &c, epsilon = 1e-12);
        }
    }

    #[test]
    fn stacked_constant_layers_compose() {
        // two K=U=1 layers with coefficients a and b on [0,1] compose to
        // multiplication by a*b for a constant input
        let a = 2.0;
        let b = -0.5;
        let l1 = constant_basis_layer(a);
        let mut l2 = constant_basis_layer(b);
        // second layer consumes the 7-point out-grid of the first
        l2.in_grid = l1.out_grid.clone();
        l2.in_basis = Arc::new(BasisSystem::bspline(&l2.in_grid, 1, 0).unwrap());
        let inputs = Array2::from_elem((1, 9), 1.0);
        let mid = l1.forward(&inputs).unwrap();
        let out = l2.forward(&mid).unwrap();
        for v in out.iter() {
            assert_relative_eq!(v, &(a * b), epsilon = 1e-12);
        }
    }

    #[test]
    fn functional_layer_rejects_grid_mismatch() {
        let layer = constant_basis_layer(1.0);
        let inputs = Array2::from_elem((1, 5), 1.0);
        assert!(layer.forward(&inputs).is_err());
    }
}
