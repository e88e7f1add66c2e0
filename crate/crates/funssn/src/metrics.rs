//! Evaluation metrics: functional R^2, relative RMSE, Pearson
//! correlation, and surface-recovery error.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metric bundle with per-curve breakdowns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub functional_r2: f64,
    pub rel_rmse: f64,
    pub rmse: f64,
    pub pearson: f64,
    pub mse_relative_diff: f64,
    pub per_curve_r2: Vec<f64>,
    pub per_curve_rel_rmse: Vec<f64>,
}

pub fn evaluate(y: &Array2<f64>, mu: &Array2<f64>, xi: &[f64]) -> Result<EvalReport> {
    let per_curve_r2 = per_curve_r2(y, mu, xi)?;
    let functional_r2 = per_curve_r2.iter().sum::<f64>() / per_curve_r2.len() as f64;
    let per_curve_rel_rmse = per_curve_rel_rmse(y, mu)?;
    Ok(EvalReport {
        functional_r2,
        rel_rmse: per_curve_rel_rmse.iter().sum::<f64>() / per_curve_rel_rmse.len() as f64,
        rmse: rmse(y, mu)?,
        pearson: pearson(y, mu)?,
        mse_relative_diff: functional_r2,
        per_curve_r2,
        per_curve_rel_rmse,
    })
}

fn check_shapes(y: &Array2<f64>, mu: &Array2<f64>) -> Result<()> {
    if y.dim() != mu.dim() {
        return Err(Error::invalid(format!(
            "shape mismatch: y is {:?}, mu is {:?}",
            y.dim(),
            mu.dim()
        )));
    }
    if y.nrows() == 0 || y.ncols() == 0 {
        return Err(Error::invalid("empty arrays"));
    }
    Ok(())
}

fn per_curve_r2(y: &Array2<f64>, mu: &Array2<f64>, xi: &[f64]) -> Result<Vec<f64>> {
    check_shapes(y, mu)?;
    if xi.len() != y.ncols() {
        return Err(Error::invalid("quadrature weights do not match columns"));
    }
    let mut out = Vec::with_capacity(y.nrows());
    for i in 0..y.nrows() {
        let mut energy = 0.0;
        let mut err = 0.0;
        for q in 0..y.ncols() {
            let yv = y[[i, q]];
            let d = yv - mu[[i, q]];
            energy += xi[q] * yv * yv;
            err += xi[q] * d * d;
        }
        if energy == 0.0 {
            return Err(Error::DegenerateCurve {
                row: i,
                message: "true curve has zero energy".to_string(),
            });
        }
        out.push((energy - err) / energy);
    }
    Ok(out)
}

/// Per-curve energy-normalized error reduction averaged over curves,
/// `n^-1 sum_i [int y^2 - int (y-mu)^2] / int y^2`; in `(-inf, 1]`.
pub fn functional_r2(y: &Array2<f64>, mu: &Array2<f64>, xi: &[f64]) -> Result<f64> {
    let per = per_curve_r2(y, mu, xi)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Same quantity as `functional_r2`; kept as a named alias because both
/// appear in evaluation reports.
pub fn mse_relative_diff(y: &Array2<f64>, mu: &Array2<f64>, xi: &[f64]) -> Result<f64> {
    functional_r2(y, mu, xi)
}

fn per_curve_rel_rmse(y: &Array2<f64>, mu: &Array2<f64>) -> Result<Vec<f64>> {
    check_shapes(y, mu)?;
    let q = y.ncols() as f64;
    let mut out = Vec::with_capacity(y.nrows());
    for i in 0..y.nrows() {
        let row = y.row(i);
        let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if range == 0.0 {
            return Err(Error::DegenerateCurve {
                row: i,
                message: "true curve is flat (zero range)".to_string(),
            });
        }
        let mse: f64 = row
            .iter()
            .zip(mu.row(i).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / q;
        out.push(mse.sqrt() / range);
    }
    Ok(out)
}

/// Mean over curves of per-curve RMSE divided by the true curve's
/// peak-to-peak range.
pub fn rel_rmse(y: &Array2<f64>, mu: &Array2<f64>) -> Result<f64> {
    let per = per_curve_rel_rmse(y, mu)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Plain root mean squared error over all grid cells.
pub fn rmse(y: &Array2<f64>, mu: &Array2<f64>) -> Result<f64> {
    check_shapes(y, mu)?;
    let n = y.len() as f64;
    let mse = y
        .iter()
        .zip(mu.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    Ok(mse.sqrt())
}

/// Pearson correlation of the flattened arrays.
pub fn pearson(y: &Array2<f64>, mu: &Array2<f64>) -> Result<f64> {
    check_shapes(y, mu)?;
    let n = y.len() as f64;
    let my = y.sum() / n;
    let mm = mu.sum() / n;
    let mut cov = 0.0;
    let mut vy = 0.0;
    let mut vm = 0.0;
    for (a, b) in y.iter().zip(mu.iter()) {
        cov += (a - my) * (b - mm);
        vy += (a - my) * (a - my);
        vm += (b - mm) * (b - mm);
    }
    if vy == 0.0 || vm == 0.0 {
        return Err(Error::DegenerateData(
            "constant array in correlation".to_string(),
        ));
    }
    Ok(cov / (vy.sqrt() * vm.sqrt()))
}

/// Relative L2 surface error `sqrt(iint (est-true)^2) / sqrt(iint true^2)`
/// with tensor-product quadrature over the mesh.
pub fn surface_error(
    w_true: &Array2<f64>,
    w_est: &Array2<f64>,
    s_weights: &[f64],
    t_weights: &[f64],
) -> Result<f64> {
    if w_true.dim() != w_est.dim() {
        return Err(Error::invalid("surface meshes differ in shape"));
    }
    if w_true.nrows() != s_weights.len() || w_true.ncols() != t_weights.len() {
        return Err(Error::invalid("mesh does not match quadrature weights"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for r in 0..w_true.nrows() {
        for c in 0..w_true.ncols() {
            let w = s_weights[r] * t_weights[c];
            let d = w_est[[r, c]] - w_true[[r, c]];
            num += w * d * d;
            den += w * w_true[[r, c]] * w_true[[r, c]];
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateData("true surface is zero".to_string()));
    }
    Ok((num / den).sqrt())
}
