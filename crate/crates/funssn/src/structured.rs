//! The interpretable model part: per-predictor encodings, tensor-product
//! coefficient matrices, functional intercept, and their gradients.
//!
//! The forward pass is the chained product `Phi* Theta^T Psi`; the two
//! basis evaluation matrices are never combined into one large design
//! matrix, and predictors sharing a grid share one evaluated basis.

use ndarray::{Array1, Array2};
use std::sync::Arc;

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::grid::{penalty_quadratic, Grid};

/// One functional term: coefficient matrix `theta` (U x K_j) with its
/// encoding basis.
#[derive(Debug, Clone)]
pub struct StructuredTerm {
    pub theta: Array2<f64>,
    pub s_basis: Arc<BasisSystem>,
    pub predictor_index: usize,
}

/// Intercept plus all structured terms; every term decodes through the
/// same outcome basis.
#[derive(Debug, Clone)]
pub struct StructuredPart {
    pub intercept_theta: Array1<f64>,
    pub terms: Vec<StructuredTerm>,
    pub t_basis: Arc<BasisSystem>,
}

/// Gradients matching a `StructuredPart`'s parameters.
#[derive(Debug, Clone)]
pub struct StructuredGrads {
    pub intercept: Array1<f64>,
    pub terms: Vec<Array2<f64>>,
}

impl StructuredPart {
    /// Zero-initialized part for `num_predictors` terms. Terms whose grids
    /// compare equal share one evaluated s-basis (basis recycling).
    pub fn zeros(
        predictor_grids: &[Grid],
        outcome_grid: &Grid,
        k_basis: usize,
        u_basis: usize,
        degree: usize,
    ) -> Result<Self> {
        let t_basis = Arc::new(BasisSystem::bspline(outcome_grid, u_basis, degree)?);
        let mut cache: Vec<(Grid, Arc<BasisSystem>)> = Vec::new();
        let mut terms = Vec::new();
        for (j, grid) in predictor_grids.iter().enumerate() {
            let s_basis = match cache.iter().find(|(g, _)| g == grid) {
                Some((_, b)) => Arc::clone(b),
                None => {
                    let b = Arc::new(BasisSystem::bspline(grid, k_basis, degree)?);
                    cache.push((grid.clone(), Arc::clone(&b)));
                    b
                }
            };
            terms.push(StructuredTerm {
                theta: Array2::zeros((u_basis, s_basis.num_basis())),
                s_basis,
                predictor_index: j,
            });
        }
        Ok(StructuredPart {
            intercept_theta: Array1::zeros(u_basis),
            terms,
            t_basis,
        })
    }

    pub fn num_t_basis(&self) -> usize {
        self.t_basis.num_basis()
    }

    /// Total coefficient count: U + sum_j U*K_j.
    pub fn num_params(&self) -> usize {
        self.intercept_theta.len() + self.terms.iter().map(|t| t.theta.len()).sum::<usize>()
    }
}

/// Quadrature encoding of one observed curve against an s-basis:
/// `Phi*_k = sum_r Delta(s_r) phi_k(s_r) x(s_r)`.
pub fn encode(x_row: &[f64], grid: &Grid, s_basis: &BasisSystem) -> Result<Array1<f64>> {
    if x_row.len() != grid.len() {
        return Err(Error::invalid(format!(
            "curve has {} samples, grid has {} points",
            x_row.len(),
            grid.len()
        )));
    }
    if s_basis.eval_matrix().ncols() != grid.len() {
        return Err(Error::invalid(
            "basis was evaluated on a different grid length",
        ));
    }
    let k = s_basis.num_basis();
    let mut out = Array1::zeros(k);
    let weights = grid.quad_weights();
    let eval = s_basis.eval_matrix();
    for kk in 0..k {
        let mut acc = 0.0;
        for r in 0..grid.len() {
            acc += weights[r] * eval[[kk, r]] * x_row[r];
        }
        out[kk] = acc;
    }
    Ok(out)
}

/// Encodes all n rows of a predictor array: returns n x K.
pub fn encode_matrix(x: &Array2<f64>, grid: &Grid, s_basis: &BasisSystem) -> Result<Array2<f64>> {
    if x.ncols() != grid.len() {
        return Err(Error::invalid("predictor columns do not match grid length"));
    }
    // (Delta o x) Phi^T as one matrix product
    let weights = Array1::from(grid.quad_weights().to_vec());
    let weighted = x * &weights;
    Ok(weighted.dot(&s_basis.eval_matrix().t()))
}

/// Decodes one encoded curve through a term: `(encoded theta^T) t_eval`,
/// a K-vector to a Q-vector via two small products.
pub fn term_forward(
    encoded: &Array1<f64>,
    theta: &Array2<f64>,
    t_eval: &Array2<f64>,
) -> Result<Array1<f64>> {
    let (u, k) = theta.dim();
    if encoded.len() != k {
        return Err(Error::invalid(format!(
            "encoded length {} vs theta columns {k}",
            encoded.len()
        )));
    }
    if t_eval.nrows() != u {
        return Err(Error::invalid(format!(
            "t_eval has {} rows vs theta rows {u}",
            t_eval.nrows()
        )));
    }
    let latent = theta.dot(encoded); // U
    Ok(latent.dot(t_eval)) // Q
}

/// Batched term forward: encoded (n x K) -> (n x Q).
pub fn term_forward_batch(
    encoded: &Array2<f64>,
    theta: &Array2<f64>,
    t_eval: &Array2<f64>,
) -> Result<Array2<f64>> {
    let (u, k) = theta.dim();
    if encoded.ncols() != k || t_eval.nrows() != u {
        return Err(Error::invalid("term_forward_batch shape mismatch"));
    }
    Ok(encoded.dot(&theta.t()).dot(t_eval))
}

/// Full structured prediction: broadcast decoded intercept plus the sum
/// of all term forwards. `encoded_rows[j]` is the n x K_j encoding of
/// predictor j; `t_eval` is the U x Q outcome basis evaluation.
pub fn structured_forward(
    part: &StructuredPart,
    encoded_rows: &[Array2<f64>],
    t_eval: &Array2<f64>,
) -> Result<Array2<f64>> {
    if encoded_rows.len() != part.terms.len() {
        return Err(Error::invalid(format!(
            "{} encoded predictors for {} terms",
            encoded_rows.len(),
            part.terms.len()
        )));
    }
    let n = encoded_rows.first().map_or(0, |e| e.nrows());
    let q = t_eval.ncols();
    let intercept_curve = part.intercept_theta.dot(t_eval); // Q
    let mut out = Array2::zeros((n.max(1), q));
    for mut row in out.rows_mut() {
        row.assign(&intercept_curve);
    }
    for (term, encoded) in part.terms.iter().zip(encoded_rows) {
        if encoded.nrows() != out.nrows() {
            return Err(Error::invalid("encoded predictors disagree on row count"));
        }
        out += &term_forward_batch(encoded, &term.theta, t_eval)?;
    }
    Ok(out)
}

/// Weight surface `w(s,t) = psi(t)^T Theta phi(s)` on a requested mesh;
/// rows index `s_points`, columns `t_points`.
pub fn surface(
    theta: &Array2<f64>,
    s_basis: &BasisSystem,
    t_basis: &BasisSystem,
    s_points: &[f64],
    t_points: &[f64],
) -> Result<Array2<f64>> {
    let (u, k) = theta.dim();
    if s_basis.num_basis() != k || t_basis.num_basis() != u {
        return Err(Error::invalid("theta shape does not match bases"));
    }
    let mut phi = Array2::zeros((k, s_points.len()));
    for (c, &s) in s_points.iter().enumerate() {
        let vals = s_basis.eval_at(s)?;
        for kk in 0..k {
            phi[[kk, c]] = vals[kk];
        }
    }
    let mut psi = Array2::zeros((u, t_points.len()));
    for (c, &t) in t_points.iter().enumerate() {
        let vals = t_basis.eval_at(t)?;
        for uu in 0..u {
            psi[[uu, c]] = vals[uu];
        }
    }
    // (S x K)(K x U)(U x T)
    Ok(phi.t().dot(&theta.t()).dot(&psi))
}

/// Exact gradients of `sum_{i,q} upstream_{i,q} * lambda_plus_{i,q}` plus
/// the penalty terms w.r.t. every coefficient matrix.
pub fn structured_gradients(
    part: &StructuredPart,
    encoded_rows: &[Array2<f64>],
    t_eval: &Array2<f64>,
    upstream: &Array2<f64>,
    lambda_s: f64,
    lambda_t: f64,
) -> Result<StructuredGrads> {
    if encoded_rows.len() != part.terms.len() {
        return Err(Error::invalid("encoded predictor count mismatch"));
    }
    if upstream.ncols() != t_eval.ncols() {
        return Err(Error::invalid("upstream columns do not match t_eval"));
    }
    let p_t = crate::basis::first_difference_penalty(part.num_t_basis());
    // t_eval (U x Q) . upstream^T (Q x n) -> U x n
    let psi_up = t_eval.dot(&upstream.t());

    let intercept = psi_up.sum_axis(ndarray::Axis(1))
        + &(2.0 * lambda_t * p_t.dot(&part.intercept_theta));

    let mut terms = Vec::with_capacity(part.terms.len());
    for (term, encoded) in part.terms.iter().zip(encoded_rows) {
        if encoded.nrows() != upstream.nrows() {
            return Err(Error::invalid("upstream rows do not match encodings"));
        }
        let mut g = psi_up.dot(encoded); // U x K
        if lambda_s > 0.0 {
            g += &(2.0 * lambda_s * term.theta.dot(term.s_basis.penalty()));
        }
        if lambda_t > 0.0 {
            g += &(2.0 * lambda_t * p_t.dot(&term.theta));
        }
        terms.push(g);
    }
    Ok(StructuredGrads { intercept, terms })
}

/// Penalty value for a whole structured part: s- and t-penalties on every
/// term plus the t-penalty on the intercept.
pub fn structured_penalty(part: &StructuredPart, lambda_s: f64, lambda_t: f64) -> Result<f64> {
    let p_t = crate::basis::first_difference_penalty(part.num_t_basis());
    let mut total = lambda_t * part.intercept_theta.dot(&p_t.dot(&part.intercept_theta));
    for term in &part.terms {
        total += penalty_quadratic(&term.theta, term.s_basis.penalty(), &p_t, lambda_s, lambda_t)?;
    }
    Ok(total)
}
