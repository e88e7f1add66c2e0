//! Implementations of the CLI verbs. Each verb reads what it needs from
//! the run configuration, writes artifacts under the output directory and
//! prints a one-line summary.

use std::path::{Path, PathBuf};

use funssn::dataio::{split_indices, FunctionalDataset, GridSpec, Standardizer};
use funssn::deep::{Architecture, DeepConfig, DeepNet};
use funssn::metrics::evaluate;
use funssn::model::SemiStructuredModel;
use funssn::pho::{assemble_omega, pho_correct};
use funssn::structured::{structured_forward, structured_gradients, surface};
use funssn::training::{functional_risk, train};
use funssn::{Error, Result};
use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::alloc;
use crate::artifacts::{atomic_write, ensure_dir, read_matrix_csv, write_json, write_matrix_csv};
use crate::config::{DataSection, ModelSection, RunConfig};

pub struct Globals {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub memory_budget: Option<usize>,
}

impl Globals {
    /// Global --seed overrides any per-section seed.
    fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.unwrap_or(fallback)
    }
}

/// Echoes the effective configuration into the output directory so every
/// run is reproducible from its artifacts alone.
fn echo_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    write_json(&out.join("config.json"), cfg)
}

fn load_dataset(data: &DataSection) -> Result<FunctionalDataset> {
    let unit = GridSpec::Range {
        lo: 0.0,
        hi: 1.0,
        count: 0,
    };
    let predictor_specs: Vec<GridSpec> = if data.predictor_grids.is_empty() {
        vec![unit.clone(); data.predictors.len()]
    } else if data.predictor_grids.len() == data.predictors.len() {
        data.predictor_grids.clone()
    } else {
        return Err(Error::invalid(format!(
            "{} predictor grid specs for {} predictor files",
            data.predictor_grids.len(),
            data.predictors.len()
        )));
    };
    let outcome_spec = data.outcome_grid.clone().unwrap_or(unit);
    let mut ds = FunctionalDataset::load_csv(
        &data.predictors.iter().map(PathBuf::from).collect::<Vec<_>>(),
        PathBuf::from(&data.outcome),
        &predictor_specs,
        &outcome_spec,
    )?;
    if data.skip_degenerate {
        let keep: Vec<usize> = (0..ds.n())
            .filter(|&i| {
                let row = ds.outcome.row(i);
                let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi > lo
            })
            .collect();
        if keep.len() < ds.n() {
            eprintln!(
                "warning: skipping {} degenerate outcome curve(s)",
                ds.n() - keep.len()
            );
            ds = ds.subset(&keep)?;
        }
    }
    Ok(ds)
}

fn build_model(
    ds: &FunctionalDataset,
    section: &ModelSection,
    seed: u64,
) -> Result<SemiStructuredModel> {
    let mut model = SemiStructuredModel::structured_only(
        ds.predictor_grids.clone(),
        ds.outcome_grid.clone(),
        section.k_basis,
        section.u_basis,
        section.degree,
    )?;
    model.link = section.link;
    if let Some(deep) = &section.deep {
        let config = DeepConfig {
            architecture: deep.architecture,
            hidden_sizes: deep.hidden_sizes.clone(),
            activation: deep.activation,
            dropout_rate: deep.dropout_rate,
            seed,
        };
        let (input_dim, output_dim) = match deep.architecture {
            Architecture::SharedCodec => (
                section.k_basis * ds.num_predictors(),
                section.u_basis,
            ),
            Architecture::Generic => (
                ds.predictor_grids.iter().map(|g| g.len()).sum(),
                ds.outcome_grid.len(),
            ),
        };
        model.deep = Some(DeepNet::init(config, input_dim, output_dim)?);
    } else if section.deep_only {
        return Err(Error::invalid(
            "model.deep_only requires a model.deep section",
        ));
    }
    Ok(model)
}

// ---- simulate --------------------------------------------------------------

pub fn cmd_simulate(cfg: &RunConfig, g: &Globals) -> Result<()> {
    let section = cfg.sim()?;
    let mut sim = section.to_sim_config();
    sim.seed = g.seed_or(sim.seed);
    let (ds, truth) = funssn::simgen::generate(&sim)?;

    ensure_dir(&g.out_dir)?;
    echo_config(&g.out_dir, cfg)?;
    for (j, x) in ds.predictors.iter().enumerate() {
        write_matrix_csv(&g.out_dir.join(format!("x{}.csv", j + 1)), x)?;
    }
    write_matrix_csv(&g.out_dir.join("y.csv"), &ds.outcome)?;
    write_matrix_csv(&g.out_dir.join("truth_surface.csv"), &truth.surface)?;
    write_matrix_csv(&g.out_dir.join("truth_noiseless.csv"), &truth.noiseless)?;
    write_json(&g.out_dir.join("sim_config.json"), &sim)?;
    println!(
        "simulate: n={} J={} R={} Q={} snr={} seed={} sigma={:.6} -> {}",
        sim.n,
        sim.j,
        sim.r,
        sim.q,
        sim.snr,
        sim.seed,
        truth.noise_sigma,
        g.out_dir.display()
    );
    Ok(())
}

// ---- fit -------------------------------------------------------------------

#[derive(Serialize)]
struct LogLine {
    epoch: usize,
    train_risk: f64,
    val_risk: f64,
}

pub fn cmd_fit(cfg: &RunConfig, g: &Globals) -> Result<()> {
    let ds = load_dataset(cfg.data()?)?;
    let model_section = cfg.model()?;
    let train_section = cfg.train.clone().unwrap_or_default();
    let mut tc = train_section.to_train_config();
    tc.seed = g.seed_or(tc.seed);
    tc.freeze_structured = model_section.deep_only;

    let (ds, standardizer) = if cfg.data()?.standardize {
        let (train_rows, _) = split_indices(ds.n(), tc.validation_fraction, tc.seed)?;
        let st = Standardizer::fit(&ds, &train_rows)?;
        (st.apply(&ds)?, Some(st))
    } else {
        (ds, None)
    };

    let mut model = build_model(&ds, model_section, tc.seed)?;
    let report = train(&mut model, &ds, &tc)?;

    ensure_dir(&g.out_dir)?;
    echo_config(&g.out_dir, cfg)?;
    model.save(g.out_dir.join("model.json"))?;
    if let Some(st) = &standardizer {
        write_json(&g.out_dir.join("standardizer.json"), st)?;
    }

    let mut log = String::new();
    for rec in &report.epochs {
        log.push_str(&serde_json::to_string(&LogLine {
            epoch: rec.epoch,
            train_risk: rec.train_risk,
            val_risk: rec.val_risk,
        })
        .map_err(|e| Error::invalid(e.to_string()))?);
        log.push('\n');
    }
    atomic_write(&g.out_dir.join("train_log.jsonl"), log.as_bytes())?;

    // held-out metrics on the same validation split used during training
    let (_, val_rows) = split_indices(ds.n(), tc.validation_fraction, tc.seed)?;
    let val_ds = ds.subset(&val_rows)?;
    let mu = model.predict(&val_ds)?;
    let eval = evaluate(&val_ds.outcome, &mu, val_ds.outcome_grid.quad_weights())?;
    write_json(&g.out_dir.join("metrics.json"), &eval)?;

    println!(
        "fit: {} epochs (best {}), val risk {:.6e}, held-out R2 {:.4} -> {}",
        report.epochs.len(),
        report.stopped_epoch,
        report.best_validation_risk,
        eval.functional_r2,
        g.out_dir.display()
    );
    Ok(())
}

// ---- predict ---------------------------------------------------------------

pub fn cmd_predict(cfg: &RunConfig, g: &Globals, checkpoint: &Path) -> Result<()> {
    let model = SemiStructuredModel::load(checkpoint)?;
    let ds = load_dataset(cfg.data()?)?;
    let (plus, minus) = model.predict_parts(&ds)?;
    let mu = (&plus + &minus).mapv(|v| model.link.apply(v));

    ensure_dir(&g.out_dir)?;
    echo_config(&g.out_dir, cfg)?;
    write_matrix_csv(&g.out_dir.join("predictions.csv"), &mu)?;
    write_matrix_csv(&g.out_dir.join("lambda_plus.csv"), &plus)?;
    write_matrix_csv(&g.out_dir.join("lambda_minus.csv"), &minus)?;
    println!(
        "predict: {} curves x {} points -> {}",
        mu.nrows(),
        mu.ncols(),
        g.out_dir.display()
    );
    Ok(())
}

// ---- evaluate --------------------------------------------------------------

pub fn cmd_evaluate(
    cfg: &RunConfig,
    g: &Globals,
    checkpoint: Option<&Path>,
    predictions: Option<&Path>,
) -> Result<()> {
    let ds = load_dataset(cfg.data()?)?;
    let mu = match (checkpoint, predictions) {
        (_, Some(path)) => read_matrix_csv(path)?,
        (Some(path), None) => {
            let model = SemiStructuredModel::load(path)?;
            model.predict(&ds)?
        }
        (None, None) => {
            return Err(Error::invalid(
                "evaluate needs --checkpoint or --predictions",
            ))
        }
    };
    let report = evaluate(&ds.outcome, &mu, ds.outcome_grid.quad_weights())?;

    ensure_dir(&g.out_dir)?;
    echo_config(&g.out_dir, cfg)?;
    write_json(&g.out_dir.join("eval.json"), &report)?;
    let mut per_curve = String::from("curve,functional_r2,rel_rmse\n");
    for (i, (r2, rr)) in report
        .per_curve_r2
        .iter()
        .zip(&report.per_curve_rel_rmse)
        .enumerate()
    {
        let mut b1 = ryu::Buffer::new();
        let mut b2 = ryu::Buffer::new();
        per_curve.push_str(&format!("{i},{},{}\n", b1.format(*r2), b2.format(*rr)));
    }
    atomic_write(&g.out_dir.join("per_curve.csv"), per_curve.as_bytes())?;
    println!(
        "evaluate: functional R2 {:.4}, relRMSE {:.4} -> {}",
        report.functional_r2,
        report.rel_rmse,
        g.out_dir.display()
    );
    Ok(())
}

// ---- pho -------------------------------------------------------------------

pub fn cmd_pho(cfg: &RunConfig, g: &Globals, checkpoint: &Path) -> Result<()> {
    let model = SemiStructuredModel::load(checkpoint)?;
    let ds = load_dataset(cfg.data()?)?;
    ensure_dir(&g.out_dir)?;
    echo_config(&g.out_dir, cfg)?;

    write_term_surfaces(&model, &g.out_dir, "")?;
    if model.deep.is_none() {
        eprintln!("warning: checkpoint has no deep part; surfaces written unchanged");
        println!("pho: nothing to correct -> {}", g.out_dir.display());
        return Ok(());
    }

    let (plus, minus) = model.predict_parts(&ds)?;
    let encoded = model.encode_dataset(&ds)?;
    let t_eval = model.structured.t_basis.eval_matrix();
    let max_cells = g.memory_budget.map(|bytes| bytes / 8);
    let omega = assemble_omega(&model.structured, &encoded, t_eval, max_cells).map_err(|e| {
        match e {
            Error::CapacityExceeded(msg) => Error::CapacityExceeded(format!(
                "{msg}; raise --memory-budget or rerun with the gram path on a subset"
            )),
            other => other,
        }
    })?;
    let path = cfg.pho.clone().unwrap_or_default().to_path()?;
    let result = pho_correct(&omega, &model.structured, &minus, path)?;
    let report = result.report(&model.structured);

    // checkpoint with corrected structured coefficients; the deep part is
    // kept as trained (its orthogonalized predictions are written separately)
    let mut corrected_model = model.clone();
    corrected_model.structured.intercept_theta = result.intercept_corrected.clone();
    for (term, theta) in corrected_model
        .structured
        .terms
        .iter_mut()
        .zip(&result.theta_corrected)
    {
        term.theta = theta.clone();
    }
    corrected_model.save(g.out_dir.join("model_pho.json"))?;
    write_json(&g.out_dir.join("pho_report.json"), &report)?;
    write_term_surfaces(&corrected_model, &g.out_dir, "_pho")?;

    // predictions are preserved: corrected structured + orthogonal remainder
    let corrected_encoded = corrected_model.encode_dataset(&ds)?;
    let corrected_plus = structured_forward(
        &corrected_model.structured,
        &corrected_encoded,
        corrected_model.structured.t_basis.eval_matrix(),
    )?;
    let mu_before = (&plus + &minus).mapv(|v| model.link.apply(v));
    let mu_after = (&corrected_plus + &result.lambda_perp).mapv(|v| model.link.apply(v));
    write_matrix_csv(&g.out_dir.join("predictions_before.csv"), &mu_before)?;
    write_matrix_csv(&g.out_dir.join("predictions_after.csv"), &mu_after)?;
    write_matrix_csv(&g.out_dir.join("lambda_perp.csv"), &result.lambda_perp)?;

    println!(
        "pho: rank {}, residual norm {:.3e} -> {}",
        report.rank,
        report.residual_norm,
        g.out_dir.display()
    );
    Ok(())
}

// ---- surfaces --------------------------------------------------------------

fn write_term_surfaces(model: &SemiStructuredModel, out: &Path, suffix: &str) -> Result<()> {
    let t_points = model.outcome_grid.points();
    for (j, term) in model.structured.terms.iter().enumerate() {
        let s_points = model.predictor_grids[term.predictor_index].points();
        let w = surface(
            &term.theta,
            &term.s_basis,
            &model.structured.t_basis,
            s_points,
            t_points,
        )?;
        write_matrix_csv(&out.join(format!("surface_term{}{suffix}.csv", j + 1)), &w)?;
    }
    // intercept curve over t
    let t_eval = model.structured.t_basis.eval_matrix();
    let curve = t_eval.t().dot(&model.structured.intercept_theta);
    let curve = curve.insert_axis(ndarray::Axis(0));
    write_matrix_csv(&out.join(format!("intercept{suffix}.csv")), &curve)?;
    Ok(())
}

pub fn cmd_surfaces(cfg: &RunConfig, g: &Globals, checkpoint: &Path) -> Result<()> {
    let model = SemiStructuredModel::load(checkpoint)?;
    ensure_dir(&g.out_dir)?;
    echo_config(&g.out_dir, cfg)?;
    write_term_surfaces(&model, &g.out_dir, "")?;
    println!(
        "surfaces: {} term surface(s) -> {}",
        model.structured.terms.len(),
        g.out_dir.display()
    );
    Ok(())
}

// ---- bench -----------------------------------------------------------------

struct BenchRow {
    n: usize,
    j: usize,
    r: usize,
    path: &'static str,
    peak_bytes: usize,
    wall_seconds: f64,
    final_risk: f64,
    status: &'static str,
}

/// Mini-batch structured fitting measured in isolation: only allocations
/// made inside this function count toward the reported peak.
fn bench_array_fit(
    model: &mut SemiStructuredModel,
    ds: &FunctionalDataset,
    encoded: &[Array2<f64>],
    batch_size: usize,
    epochs: usize,
    lr: f64,
) -> Result<f64> {
    let xi = ds.outcome_grid.quad_weights().to_vec();
    let n = ds.n();
    let mut risk = f64::NAN;
    for _ in 0..epochs {
        for start in (0..n).step_by(batch_size) {
            let rows: Vec<usize> = (start..(start + batch_size).min(n)).collect();
            let b = rows.len();
            let mut y_b = Array2::zeros((b, ds.outcome.ncols()));
            let mut enc_b: Vec<Array2<f64>> = encoded
                .iter()
                .map(|e| Array2::zeros((b, e.ncols())))
                .collect();
            for (bi, &row) in rows.iter().enumerate() {
                y_b.row_mut(bi).assign(&ds.outcome.row(row));
                for (e_b, e) in enc_b.iter_mut().zip(encoded) {
                    e_b.row_mut(bi).assign(&e.row(row));
                }
            }
            let t_eval = model.structured.t_basis.eval_matrix();
            let mu = structured_forward(&model.structured, &enc_b, t_eval)?;
            let mut upstream = Array2::zeros(mu.dim());
            for i in 0..b {
                for q in 0..mu.ncols() {
                    upstream[[i, q]] =
                        2.0 / b as f64 * xi[q] * (mu[[i, q]] - y_b[[i, q]]);
                }
            }
            risk = functional_risk(&y_b, &mu, &xi)?;
            let grads =
                structured_gradients(&model.structured, &enc_b, t_eval, &upstream, 0.0, 0.0)?;
            for (term, grad) in model.structured.terms.iter_mut().zip(&grads.terms) {
                term.theta.scaled_add(-lr, grad);
            }
            model
                .structured
                .intercept_theta
                .scaled_add(-lr, &grads.intercept);
        }
    }
    Ok(risk)
}

/// The deliberately naive baseline: materializes the full n*Q x P
/// long-format design matrix and runs gradient descent on it.
fn bench_naive_fit(
    model: &SemiStructuredModel,
    ds: &FunctionalDataset,
    encoded: &[Array2<f64>],
    epochs: usize,
    lr: f64,
    max_cells: Option<usize>,
) -> Result<f64> {
    let t_eval = model.structured.t_basis.eval_matrix();
    let omega = assemble_omega(&model.structured, encoded, t_eval, max_cells)?;
    let big_n = omega.values.nrows();
    let p = omega.values.ncols();
    let mut y_flat = Array1::zeros(big_n);
    for i in 0..ds.n() {
        for q in 0..ds.outcome.ncols() {
            y_flat[i * ds.outcome.ncols() + q] = ds.outcome[[i, q]];
        }
    }
    let mut theta = Array1::zeros(p);
    let mut risk = f64::NAN;
    for _ in 0..epochs {
        let mu = omega.values.dot(&theta);
        let resid = &mu - &y_flat;
        risk = resid.iter().map(|v| v * v).sum::<f64>() / big_n as f64;
        let grad = omega.values.t().dot(&resid) * (2.0 / big_n as f64);
        theta.scaled_add(-lr, &grad);
    }
    Ok(risk)
}

pub fn cmd_bench(cfg: &RunConfig, g: &Globals) -> Result<()> {
    let b = cfg.bench.clone().unwrap_or_default();
    let seed = g.seed_or(b.seed);
    ensure_dir(&g.out_dir)?;
    echo_config(&g.out_dir, cfg)?;

    let mut rows: Vec<BenchRow> = Vec::new();
    for &n in &b.n {
        for &j in &b.j {
            for &r in &b.r {
                let sim = funssn::simgen::SimConfig {
                    n,
                    r,
                    q: b.q,
                    j,
                    snr: 1.0,
                    seed,
                    surface: funssn::simgen::SurfaceSpec::Bumps,
                    nonlinear_amplitude: 0.0,
                };
                let (ds, _) = funssn::simgen::generate(&sim)?;
                let mut model = SemiStructuredModel::structured_only(
                    ds.predictor_grids.clone(),
                    ds.outcome_grid.clone(),
                    b.k_basis,
                    b.u_basis,
                    3,
                )?;
                let encoded = model.encode_dataset(&ds)?;

                let base = alloc::reset_peak();
                let start = std::time::Instant::now();
                let risk = bench_array_fit(
                    &mut model,
                    &ds,
                    &encoded,
                    b.batch_size,
                    b.epochs,
                    1e-3,
                )?;
                rows.push(BenchRow {
                    n,
                    j,
                    r,
                    path: "array",
                    peak_bytes: alloc::peak_bytes().saturating_sub(base),
                    wall_seconds: start.elapsed().as_secs_f64(),
                    final_risk: risk,
                    status: "ok",
                });

                let max_cells = g.memory_budget.map(|bytes| bytes / 8);
                let base = alloc::reset_peak();
                let start = std::time::Instant::now();
                match bench_naive_fit(&model, &ds, &encoded, b.epochs, 1e-3, max_cells) {
                    Ok(risk) => rows.push(BenchRow {
                        n,
                        j,
                        r,
                        path: "naive",
                        peak_bytes: alloc::peak_bytes().saturating_sub(base),
                        wall_seconds: start.elapsed().as_secs_f64(),
                        final_risk: risk,
                        status: "ok",
                    }),
                    Err(Error::CapacityExceeded(_)) => rows.push(BenchRow {
                        n,
                        j,
                        r,
                        path: "naive",
                        peak_bytes: 0,
                        wall_seconds: start.elapsed().as_secs_f64(),
                        final_risk: f64::NAN,
                        status: "over_budget",
                    }),
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let mut csv = String::from("n,j,r,path,peak_bytes,wall_seconds,final_risk,status\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6e},{}\n",
            row.n,
            row.j,
            row.r,
            row.path,
            row.peak_bytes,
            row.wall_seconds,
            row.final_risk,
            row.status
        ));
    }
    atomic_write(&g.out_dir.join("bench.csv"), csv.as_bytes())?;
    println!(
        "bench: {} cells x 2 paths -> {}",
        rows.len() / 2,
        g.out_dir.join("bench.csv").display()
    );
    Ok(())
}
