//! Discretized functional empirical risk, mini-batch Adam training, and
//! gradient verification.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::dataio::FunctionalDataset;
use crate::deep::Architecture;
use crate::error::{Error, Result};
use crate::model::{Link, SemiStructuredModel};
use crate::structured::{structured_forward, structured_gradients, structured_penalty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SquaredError,
}

impl Default for Loss {
    fn default() -> Self {
        Loss::SquaredError
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub lambda_s: f64,
    pub lambda_t: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub loss: Loss,
    /// Keep the structured coefficients fixed and train only the deep
    /// part (used for deep-only baselines).
    #[serde(default)]
    pub freeze_structured: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 200,
            patience: 20,
            learning_rate: 1e-2,
            lambda_s: 1.0,
            lambda_t: 1.0,
            validation_fraction: 0.2,
            seed: 0,
            loss: Loss::SquaredError,
            freeze_structured: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.lambda_s < 0.0 || self.lambda_t < 0.0 {
            return Err(Error::invalid("penalty weights must be nonnegative"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_risk: f64,
    pub val_risk: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_validation_risk: f64,
    pub wall_seconds: f64,
}

/// `n^-1 sum_i sum_q Xi(t_q) (y - mu)^2`: the discretized functional
/// empirical risk with squared-error pointwise loss.
pub fn functional_risk(y: &Array2<f64>, mu: &Array2<f64>, xi: &[f64]) -> Result<f64> {
    if y.dim() != mu.dim() {
        return Err(Error::invalid("risk: y and mu shapes differ"));
    }
    if xi.len() != y.ncols() {
        return Err(Error::invalid("risk: weights do not match columns"));
    }
    let n = y.nrows().max(1) as f64;
    let mut total = 0.0;
    for i in 0..y.nrows() {
        for q in 0..y.ncols() {
            let d = y[[i, q]] - mu[[i, q]];
            total += xi[q] * d * d;
        }
    }
    Ok(total / n)
}

// ---- flat parameter vector ------------------------------------------------

pub(crate) fn gather_params(model: &SemiStructuredModel) -> Vec<f64> {
    let mut out: Vec<f64> = model.structured.intercept_theta.iter().copied().collect();
    for term in &model.structured.terms {
        out.extend(term.theta.iter());
    }
    if let Some(net) = &model.deep {
        for layer in &net.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
    }
    out
}

pub(crate) fn scatter_params(model: &mut SemiStructuredModel, flat: &[f64]) {
    let mut idx = 0;
    for v in model.structured.intercept_theta.iter_mut() {
        *v = flat[idx];
        idx += 1;
    }
    for term in &mut model.structured.terms {
        for v in term.theta.iter_mut() {
            *v = flat[idx];
            idx += 1;
        }
    }
    if let Some(net) = &mut model.deep {
        for layer in &mut net.layers {
            for v in layer.weights.iter_mut() {
                *v = flat[idx];
                idx += 1;
            }
            for v in layer.bias.iter_mut() {
                *v = flat[idx];
                idx += 1;
            }
        }
    }
    debug_assert_eq!(idx, flat.len());
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(num_params: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

// ---- gradient of the full objective ---------------------------------------

fn take_rows(a: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), a.ncols()));
    for (i, &r) in rows.iter().enumerate() {
        out.row_mut(i).assign(&a.row(r));
    }
    out
}

/// Analytic gradient of `risk(batch) + penalty` w.r.t. the flat parameter
/// vector, normalized by the batch row count. Optionally samples dropout
/// masks from `rng`.
fn objective_gradient(
    model: &SemiStructuredModel,
    encoded: &[Array2<f64>],
    deep_inputs: Option<&Array2<f64>>,
    y: &Array2<f64>,
    xi: &[f64],
    lambda_s: f64,
    lambda_t: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(Vec<f64>, f64)> {
    let t_eval = model.structured.t_basis.eval_matrix();
    let lambda_plus = structured_forward(&model.structured, encoded, t_eval)?;
    let training = rng.is_some();

    let (lambda_minus, deep_cache) = match (&model.deep, deep_inputs) {
        (Some(net), Some(inputs)) => {
            let (out, cache) = net.forward(inputs, training, rng)?;
            let lm = match net.config.architecture {
                Architecture::SharedCodec => out.dot(t_eval),
                Architecture::Generic => out.clone(),
            };
            (lm, Some((cache, out)))
        }
        (None, _) => (Array2::zeros(lambda_plus.dim()), None),
        (Some(_), None) => {
            return Err(Error::ContractViolation(
                "deep model without deep inputs".to_string(),
            ))
        }
    };

    let pre = &lambda_plus + &lambda_minus;
    let mu = pre.mapv(|v| model.link.apply(v));
    let n = y.nrows().max(1) as f64;
    let risk = functional_risk(y, &mu, xi)?;
    if !risk.is_finite() {
        return Err(Error::TrainingFailure {
            epoch: 0,
            message: "non-finite risk".to_string(),
        });
    }

    // upstream = d risk / d pre-link prediction
    let mut upstream = Array2::zeros(mu.dim());
    for i in 0..mu.nrows() {
        for q in 0..mu.ncols() {
            let link_deriv = match model.link {
                Link::Identity => 1.0,
                Link::Exp => mu[[i, q]],
                Link::Sigmoid => mu[[i, q]] * (1.0 - mu[[i, q]]),
            };
            upstream[[i, q]] = 2.0 / n * xi[q] * (mu[[i, q]] - y[[i, q]]) * link_deriv;
        }
    }

    let sgrads = structured_gradients(
        &model.structured,
        encoded,
        t_eval,
        &upstream,
        lambda_s,
        lambda_t,
    )?;
    let mut flat: Vec<f64> = sgrads.intercept.iter().copied().collect();
    for g in &sgrads.terms {
        flat.extend(g.iter());
    }
    if let Some(net) = &model.deep {
        let (cache, _) = deep_cache.as_ref().unwrap();
        let deep_upstream = match net.config.architecture {
            Architecture::SharedCodec => upstream.dot(&t_eval.t()),
            Architecture::Generic => upstream.clone(),
        };
        for (gw, gb) in net.backward(cache, &deep_upstream)? {
            flat.extend(gw.iter());
            flat.extend(gb.iter());
        }
    }
    Ok((flat, risk))
}

/// Full objective value `risk + penalty` with dropout disabled.
fn objective_value(
    model: &SemiStructuredModel,
    ds: &FunctionalDataset,
    encoded: &[Array2<f64>],
    lambda_s: f64,
    lambda_t: f64,
) -> Result<f64> {
    let (plus, minus) = model.predict_parts_with(ds, encoded, false, None)?;
    let mu = (&plus + &minus).mapv(|v| model.link.apply(v));
    let risk = functional_risk(&ds.outcome, &mu, ds.outcome_grid.quad_weights())?;
    Ok(risk + structured_penalty(&model.structured, lambda_s, lambda_t)?)
}

/// Mini-batch Adam training of all structured and deep parameters against
/// the functional risk plus smoothing penalties, with early stopping on a
/// validation split and best-parameter restoration.
pub fn train(
    model: &mut SemiStructuredModel,
    ds: &FunctionalDataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if ds.n() < 2 {
        return Err(Error::invalid("training needs at least 2 observations"));
    }
    let start = Instant::now();
    let xi = ds.outcome_grid.quad_weights().to_vec();

    let (train_rows, val_rows) =
        crate::dataio::split_indices(ds.n(), config.validation_fraction, config.seed)?;
    let train_ds = ds.subset(&train_rows)?;
    let val_ds = ds.subset(&val_rows)?;

    let train_encoded = model.encode_dataset(&train_ds)?;
    let val_encoded = model.encode_dataset(&val_ds)?;
    let train_deep_inputs = if model.deep.is_some() {
        Some(model.deep_inputs(&train_ds, &train_encoded)?)
    } else {
        None
    };

    let mut params = gather_params(model);
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));

    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut epochs_without_improvement = 0;
    let mut records = Vec::new();
    let n_train = train_ds.n();

    for epoch in 0..config.max_epochs {
        let epoch_start = Instant::now();
        let mut order: Vec<usize> = (0..n_train).collect();
        order.shuffle(&mut shuffle_rng);

        for batch in order.chunks(config.batch_size) {
            let y_batch = take_rows(&train_ds.outcome, batch);
            let enc_batch: Vec<Array2<f64>> =
                train_encoded.iter().map(|e| take_rows(e, batch)).collect();
            let deep_batch = train_deep_inputs.as_ref().map(|d| take_rows(d, batch));

            scatter_params(model, &params);
            let rng = if model
                .deep
                .as_ref()
                .map(|d| d.config.dropout_rate > 0.0)
                .unwrap_or(false)
            {
                Some(&mut dropout_rng)
            } else {
                None
            };
            let (mut grads, batch_risk) = objective_gradient(
                model,
                &enc_batch,
                deep_batch.as_ref(),
                &y_batch,
                &xi,
                config.lambda_s,
                config.lambda_t,
                rng,
            )
            .map_err(|e| match e {
                Error::TrainingFailure { .. } => Error::TrainingFailure {
                    epoch,
                    message: "risk became non-finite".to_string(),
                },
                other => other,
            })?;
            if !batch_risk.is_finite() {
                return Err(Error::TrainingFailure {
                    epoch,
                    message: "risk became non-finite".to_string(),
                });
            }
            if config.freeze_structured {
                let frozen = model.structured.num_params();
                grads[..frozen].fill(0.0);
            }
            adam.step(&mut params, &grads);
        }

        scatter_params(model, &params);
        let train_mu = {
            let (p, m) = model.predict_parts_with(&train_ds, &train_encoded, false, None)?;
            (p + m).mapv(|v| model.link.apply(v))
        };
        let train_risk = functional_risk(&train_ds.outcome, &train_mu, &xi)?;
        let val_mu = {
            let (p, m) = model.predict_parts_with(&val_ds, &val_encoded, false, None)?;
            (p + m).mapv(|v| model.link.apply(v))
        };
        let val_risk = functional_risk(&val_ds.outcome, &val_mu, &xi)?;
        if !train_risk.is_finite() || !val_risk.is_finite() {
            return Err(Error::TrainingFailure {
                epoch,
                message: "epoch risk became non-finite".to_string(),
            });
        }
        records.push(EpochRecord {
            epoch,
            train_risk,
            val_risk,
            seconds: epoch_start.elapsed().as_secs_f64(),
        });

        if val_risk < best_val {
            best_val = val_risk;
            best_params = params.clone();
            best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            epochs_without_improvement += 1;
            if epochs_without_improvement > config.patience {
                break;
            }
        }
    }

    scatter_params(model, &best_params);
    Ok(TrainReport {
        epochs: records,
        stopped_epoch: best_epoch,
        best_validation_risk: best_val,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub num_params: usize,
    pub max_relative_error: f64,
    pub pass: bool,
    pub tolerance: f64,
}

/// Compares the analytic gradient of `risk + penalty` against central
/// finite differences on every parameter (dropout disabled).
pub fn grad_check(
    model: &SemiStructuredModel,
    ds: &FunctionalDataset,
    lambda_s: f64,
    lambda_t: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut model = model.clone();
    let encoded = model.encode_dataset(ds)?;
    let deep_inputs = if model.deep.is_some() {
        Some(model.deep_inputs(ds, &encoded)?)
    } else {
        None
    };
    let xi = ds.outcome_grid.quad_weights().to_vec();
    let (analytic, _) = objective_gradient(
        &model,
        &encoded,
        deep_inputs.as_ref(),
        &ds.outcome,
        &xi,
        lambda_s,
        lambda_t,
        None,
    )?;

    let params = gather_params(&model);
    let h = 1e-5;
    // Components much smaller than the overall gradient scale are dominated
    // by finite-difference roundoff; judge those against the gradient scale
    // rather than their own magnitude.
    let grad_scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = (1e-4 * grad_scale).max(1e-8);
    let mut max_rel = 0.0f64;
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus[i] += h;
        scatter_params(&mut model, &plus);
        let f_plus = objective_value(&model, ds, &encoded, lambda_s, lambda_t)?;
        let mut minus = params.clone();
        minus[i] -= h;
        scatter_params(&mut model, &minus);
        let f_minus = objective_value(&model, ds, &encoded, lambda_s, lambda_t)?;
        let fd = (f_plus - f_minus) / (2.0 * h);
        let denom = analytic[i].abs().max(fd.abs()).max(floor);
        let rel = (analytic[i] - fd).abs() / denom;
        max_rel = max_rel.max(rel);
    }
    scatter_params(&mut model, &params);
    Ok(GradCheckReport {
        num_params: params.len(),
        max_relative_error: max_rel,
        pass: max_rel <= tolerance,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deep::{Activation, DeepConfig, DeepNet};
    use crate::grid::Grid;
    use approx::assert_relative_eq;
    use ndarray::Array1;
    use rand::Rng;

    fn planted_dataset(n: usize, r: usize, q: usize, seed: u64) -> FunctionalDataset {
        // noiseless data generated from the model class itself
        let s_grid = Grid::uniform(0.0, 1.0, r).unwrap();
        let t_grid = Grid::uniform(0.0, 1.0, q).unwrap();
        let mut truth = SemiStructuredModel::structured_only(
            vec![s_grid.clone()],
            t_grid.clone(),
            5,
            4,
            3,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        truth.structured.terms[0].theta =
            Array2::from_shape_fn((4, 5), |_| rng.gen_range(-1.0..1.0));
        truth.structured.intercept_theta =
            Array1::from_shape_fn(4, |_| rng.gen_range(-0.5..0.5));
        let x = Array2::from_shape_fn((n, r), |_| rng.gen_range(-1.0..1.0));
        let tmp = FunctionalDataset::new(
            vec![x.clone()],
            vec![s_grid.clone()],
            Array2::zeros((n, q)),
            t_grid.clone(),
            vec!["x".into()],
        )
        .unwrap();
        let y = truth.predict(&tmp).unwrap();
        FunctionalDataset::new(vec![x], vec![s_grid], y, t_grid, vec!["x".into()]).unwrap()
    }

    #[test]
    fn risk_basics() {
        let g = Grid::uniform(0.0, 1.0, 21).unwrap();
        let y = Array2::from_elem((1, 21), 1.0);
        let mu = Array2::zeros((1, 21));
        let xi = g.quad_weights();
        assert_relative_eq!(functional_risk(&y, &y, xi).unwrap(), 0.0);
        // quadrature of the constant 1 over [0,1]
        assert_relative_eq!(functional_risk(&y, &mu, xi).unwrap(), 1.0, epsilon = 1e-12);
        let doubled: Vec<f64> = xi.iter().map(|w| 2.0 * w).collect();
        assert_relative_eq!(
            functional_risk(&y, &mu, &doubled).unwrap(),
            2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn risk_row_permutation_invariant() {
        let g = Grid::uniform(0.0, 1.0, 5).unwrap();
        let y = Array2::from_shape_fn((3, 5), |(i, j)| (i * 5 + j) as f64);
        let mu = y.mapv(|v| v * 0.8);
        let base = functional_risk(&y, &mu, g.quad_weights()).unwrap();
        let perm = [2usize, 0, 1];
        let yp = take_rows(&y, &perm);
        let mp = take_rows(&mu, &perm);
        assert_relative_eq!(
            functional_risk(&yp, &mp, g.quad_weights()).unwrap(),
            base,
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_epoch_budget_leaves_model_unchanged() {
        let ds = planted_dataset(12, 15, 9, 1);
        let mut model = SemiStructuredModel::structured_only(
            ds.predictor_grids.clone(),
            ds.outcome_grid.clone(),
            5,
            4,
            3,
        )
        .unwrap();
        let before = gather_params(&model);
        let config = TrainConfig {
            max_epochs: 0,
            ..Default::default()
        };
        let report = train(&mut model, &ds, &config).unwrap();
        assert!(report.epochs.is_empty());
        assert_eq!(gather_params(&model), before);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = planted_dataset(20, 15, 9, 2);
        let config = TrainConfig {
            max_epochs: 5,
            batch_size: 8,
            lambda_s: 0.01,
            lambda_t: 0.01,
            seed: 7,
            ..Default::default()
        };
        let run = |_| {
            let mut m = SemiStructuredModel::structured_only(
                ds.predictor_grids.clone(),
                ds.outcome_grid.clone(),
                5,
                4,
                3,
            )
            .unwrap();
            let r = train(&mut m, &ds, &config).unwrap();
            (gather_params(&m), r)
        };
        let (p1, r1) = run(0);
        let (p2, r2) = run(1);
        assert_eq!(p1, p2);
        for (a, b) in r1.epochs.iter().zip(r2.epochs.iter()) {
            assert_eq!(a.train_risk, b.train_risk);
            assert_eq!(a.val_risk, b.val_risk);
        }
        assert_eq!(r1.best_validation_risk, r2.best_validation_risk);
    }

    #[test]
    fn structured_only_recovers_planted_data() {
        let ds = planted_dataset(80, 21, 13, 3);
        let mut model = SemiStructuredModel::structured_only(
            ds.predictor_grids.clone(),
            ds.outcome_grid.clone(),
            5,
            4,
            3,
        )
        .unwrap();
        let initial = {
            let mu = model.predict(&ds).unwrap();
            functional_risk(&ds.outcome, &mu, ds.outcome_grid.quad_weights()).unwrap()
        };
        let config = TrainConfig {
            max_epochs: 800,
            patience: 800,
            batch_size: 16,
            learning_rate: 0.02,
            lambda_s: 0.0,
            lambda_t: 0.0,
            seed: 11,
            ..Default::default()
        };
        train(&mut model, &ds, &config).unwrap();
        let final_risk = {
            let mu = model.predict(&ds).unwrap();
            functional_risk(&ds.outcome, &mu, ds.outcome_grid.quad_weights()).unwrap()
        };
        assert!(
            final_risk <= 1e-6 * initial,
            "final {final_risk:.3e} vs initial {initial:.3e}"
        );
    }

    #[test]
    fn early_stopping_restores_best_parameters() {
        let ds = planted_dataset(30, 15, 9, 4);
        let mut model = SemiStructuredModel::structured_only(
            ds.predictor_grids.clone(),
            ds.outcome_grid.clone(),
            5,
            4,
            3,
        )
        .unwrap();
        let config = TrainConfig {
            max_epochs: 40,
            patience: 5,
            batch_size: 8,
            lambda_s: 0.0,
            lambda_t: 0.0,
            seed: 5,
            ..Default::default()
        };
        let report = train(&mut model, &ds, &config).unwrap();
        let min_val = report
            .epochs
            .iter()
            .map(|e| e.val_risk)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_validation_risk, min_val);
        // restored parameters reproduce the best recorded validation risk
        let (_, val_rows) =
            crate::dataio::split_indices(ds.n(), config.validation_fraction, config.seed).unwrap();
        let val_ds = ds.subset(&val_rows).unwrap();
        let mu = model.predict(&val_ds).unwrap();
        let risk =
            functional_risk(&val_ds.outcome, &mu, ds.outcome_grid.quad_weights()).unwrap();
        assert_relative_eq!(risk, min_val, max_relative = 1e-10);
    }

    #[test]
    fn grad_check_structured_only() {
        let ds = planted_dataset(6, 15, 9, 5);
        let mut model = SemiStructuredModel::structured_only(
            ds.predictor_grids.clone(),
            ds.outcome_grid.clone(),
            5,
            4,
            3,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        model.structured.terms[0].theta =
            Array2::from_shape_fn((4, 5), |_| rng.gen_range(-1.0..1.0));
        model.structured.intercept_theta = Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
        let report = grad_check(&model, &ds, 0.5, 0.3, 1e-6).unwrap();
        assert!(report.pass, "max rel error {}", report.max_relative_error);
    }

    #[test]
    fn grad_check_with_deep_part() {
        let ds = planted_dataset(6, 15, 9, 6);
        let mut model = SemiStructuredModel::structured_only(
            ds.predictor_grids.clone(),
            ds.outcome_grid.clone(),
            5,
            4,
            3,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        model.structured.terms[0].theta =
            Array2::from_shape_fn((4, 5), |_| rng.gen_range(-0.5..0.5));
        let cfg = DeepConfig {
            architecture: Architecture::SharedCodec,
            hidden_sizes: vec![6],
            activation: Activation::Tanh,
            dropout_rate: 0.0,
            seed: 2,
        };
        model.deep = Some(DeepNet::init(cfg, 5, 4).unwrap());
        let report = grad_check(&model, &ds, 0.2, 0.2, 1e-5).unwrap();
        assert!(report.pass, "max rel error {}", report.max_relative_error);
    }

    #[test]
    fn grad_check_generic_architecture() {
        let ds = planted_dataset(5, 12, 7, 12);
        let mut model = SemiStructuredModel::structured_only(
            ds.predictor_grids.clone(),
            ds.outcome_grid.clone(),
            5,
            4,
            3,
        )
        .unwrap();
        let cfg = DeepConfig {
            architecture: Architecture::Generic,
            hidden_sizes: vec![5],
            activation: Activation::Tanh,
            dropout_rate: 0.0,
            seed: 4,
        };
        model.deep = Some(DeepNet::init(cfg, 12, 7).unwrap());
        let report = grad_check(&model, &ds, 0.1, 0.1, 1e-5).unwrap();
        assert!(report.pass, "max rel error {}", report.max_relative_error);
    }
}
