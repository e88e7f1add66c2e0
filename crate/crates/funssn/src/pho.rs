//! Post-hoc orthogonalization: stack the structured basis products for
//! all n*Q training cells, absorb the deep predictions' projection onto
//! that span into corrected coefficients, and keep only the orthogonal
//! remainder as the deep part.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structured::StructuredPart;

/// Stacked basis matrix for all N = n*Q cells. Rows are observation-major
/// (all Q time points of observation 0 first). Columns: the intercept
/// block (U columns), then one U*K_j block per term in column-major vec
/// order, so `omega . stacked_coefficients` reproduces the stacked
/// structured predictions.
#[derive(Debug, Clone)]
pub struct OmegaMatrix {
    pub values: Array2<f64>,
    /// (start, len) column range per block; block 0 is the intercept.
    pub block_offsets: Vec<(usize, usize)>,
    pub n: usize,
    pub q: usize,
}

#[derive(Debug, Clone)]
pub struct PhoResult {
    /// Corrected intercept coefficients (length U).
    pub intercept_corrected: Array1<f64>,
    /// Corrected per-term coefficient matrices (U x K_j).
    pub theta_corrected: Vec<Array2<f64>>,
    /// Orthogonalized deep predictions, reshaped n x Q.
    pub lambda_perp: Array2<f64>,
    pub rank: usize,
    /// `||Omega^T lambda_perp||`.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhoReport {
    pub rank: usize,
    pub residual_norm: f64,
    pub term_norms_before: Vec<f64>,
    pub term_norms_after: Vec<f64>,
}

/// Assembles the N x P stacked basis matrix from precomputed encodings.
/// `max_cells` bounds N*P; exceeding it is a capacity error directing the
/// caller to the Gram path.
pub fn assemble_omega(
    part: &StructuredPart,
    encoded_rows: &[Array2<f64>],
    t_eval: &Array2<f64>,
    max_cells: Option<usize>,
) -> Result<OmegaMatrix> {
    if encoded_rows.len() != part.terms.len() {
        return Err(Error::invalid("encoded predictor count mismatch"));
    }
    let n = encoded_rows.first().map_or(0, |e| e.nrows());
    let u = part.num_t_basis();
    let q = t_eval.ncols();
    if t_eval.nrows() != u {
        return Err(Error::invalid("t_eval rows do not match the t-basis"));
    }
    let p: usize = u + part
        .terms
        .iter()
        .map(|t| u * t.s_basis.num_basis())
        .sum::<usize>();
    let cells = n * q * p;
    if let Some(budget) = max_cells {
        if cells > budget {
            return Err(Error::CapacityExceeded(format!(
                "omega would hold {cells} cells (> {budget}); use the Gram path"
            )));
        }
    }

    let mut block_offsets = vec![(0usize, u)];
    let mut offset = u;
    for term in &part.terms {
        let len = u * term.s_basis.num_basis();
        block_offsets.push((offset, len));
        offset += len;
    }

    let mut values = Array2::zeros((n * q, p));
    for i in 0..n {
        for qq in 0..q {
            let row = i * q + qq;
            for uu in 0..u {
                values[[row, uu]] = t_eval[[uu, qq]];
            }
            for (b, (term, encoded)) in part.terms.iter().zip(encoded_rows).enumerate() {
                let k = term.s_basis.num_basis();
                let (start, _) = block_offsets[b + 1];
                for kk in 0..k {
                    let enc = encoded[[i, kk]];
                    for uu in 0..u {
                        // column-major vec(Theta): index k*U + u
                        values[[row, start + kk * u + uu]] = enc * t_eval[[uu, qq]];
                    }
                }
            }
        }
    }
    Ok(OmegaMatrix {
        values,
        block_offsets,
        n,
        q,
    })
}

/// Stacks a part's coefficients in the omega column layout.
pub fn stack_coefficients(part: &StructuredPart) -> Array1<f64> {
    let mut out: Vec<f64> = part.intercept_theta.to_vec();
    for term in &part.terms {
        let (u, k) = term.theta.dim();
        for kk in 0..k {
            for uu in 0..u {
                out.push(term.theta[[uu, kk]]);
            }
        }
    }
    Array1::from(out)
}

/// Splits a stacked coefficient vector back into intercept and per-term
/// matrices (column-major within each block).
pub fn unstack_coefficients(
    part: &StructuredPart,
    stacked: &Array1<f64>,
) -> Result<(Array1<f64>, Vec<Array2<f64>>)> {
    let u = part.num_t_basis();
    let expected: usize = u + part
        .terms
        .iter()
        .map(|t| u * t.s_basis.num_basis())
        .sum::<usize>();
    if stacked.len() != expected {
        return Err(Error::ContractViolation(format!(
            "stacked vector has {} entries, layout expects {expected}",
            stacked.len()
        )));
    }
    let intercept = Array1::from(stacked.as_slice().unwrap()[..u].to_vec());
    let mut thetas = Vec::with_capacity(part.terms.len());
    let mut offset = u;
    for term in &part.terms {
        let k = term.s_basis.num_basis();
        let mut theta = Array2::zeros((u, k));
        for kk in 0..k {
            for uu in 0..u {
                theta[[uu, kk]] = stacked[offset + kk * u + uu];
            }
        }
        offset += u * k;
        thetas.push(theta);
    }
    Ok((intercept, thetas))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhoPath {
    /// SVD of Omega itself.
    Direct,
    /// SVD of the P x P Gram matrix; preferable when N is large.
    Gram,
    /// Direct below `auto_threshold` rows, Gram above.
    Auto,
}

/// Row-count threshold for the automatic path choice.
pub const AUTO_GRAM_THRESHOLD: usize = 50_000;

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Minimum-norm least-squares solve `argmin ||Omega x - b||` via SVD with
/// relative cutoff, returning (solution, effective rank).
fn pinv_solve(omega: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (nrows, ncols) = omega.shape();
    let svd = omega.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-10 * nrows.max(ncols) as f64 * sigma_max;
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut rank = 0;
    // x = V S^+ U^T b
    let utb = u.transpose() * b;
    let mut scaled = DMatrix::zeros(ncols.min(nrows), b.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            rank += 1;
            for c in 0..b.ncols() {
                scaled[(i, c)] = utb[(i, c)] / s;
            }
        }
    }
    (vt.transpose() * scaled, rank)
}

/// Corrects the stacked coefficients by the pseudoinverse applied to the
/// deep predictions and returns the orthogonalized remainder:
/// `theta_tilde = theta + pinv(Omega) lambda_minus`,
/// `lambda_perp = lambda_minus - Omega pinv(Omega) lambda_minus`.
pub fn pho_correct(
    omega: &OmegaMatrix,
    part: &StructuredPart,
    lambda_minus: &Array2<f64>,
    path: PhoPath,
) -> Result<PhoResult> {
    if lambda_minus.dim() != (omega.n, omega.q) {
        return Err(Error::invalid(format!(
            "lambda_minus is {:?}, omega was stacked for ({}, {})",
            lambda_minus.dim(),
            omega.n,
            omega.q
        )));
    }
    if lambda_minus.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite deep predictions"));
    }
    let n_rows = omega.values.nrows();
    let p = omega.values.ncols();
    // observation-major stacking
    let stacked: Vec<f64> = lambda_minus.iter().copied().collect();
    let b = DMatrix::from_column_slice(n_rows, 1, &stacked);
    let om = to_nalgebra(&omega.values);

    let use_gram = match path {
        PhoPath::Direct => false,
        PhoPath::Gram => true,
        PhoPath::Auto => n_rows > AUTO_GRAM_THRESHOLD,
    };
    let (correction, rank) = if use_gram {
        // pinv(Omega) b = pinv(Omega^T Omega) Omega^T b
        let gram = om.transpose() * &om;
        let rhs = om.transpose() * &b;
        pinv_solve(&gram, &rhs)
    } else {
        pinv_solve(&om, &b)
    };

    let fitted = &om * &correction;
    let mut lambda_perp = Array2::zeros((omega.n, omega.q));
    for i in 0..omega.n {
        for qq in 0..omega.q {
            lambda_perp[[i, qq]] = lambda_minus[[i, qq]] - fitted[(i * omega.q + qq, 0)];
        }
    }

    let residual = om.transpose()
        * DMatrix::from_column_slice(n_rows, 1, &lambda_perp.iter().copied().collect::<Vec<_>>());
    let residual_norm = residual.norm();

    let theta = stack_coefficients(part);
    let mut corrected = Array1::zeros(p);
    for i in 0..p {
        corrected[i] = theta[i] + correction[(i, 0)];
    }
    let (intercept_corrected, theta_corrected) = unstack_coefficients(part, &corrected)?;

    Ok(PhoResult {
        intercept_corrected,
        theta_corrected,
        lambda_perp,
        rank,
        residual_norm,
    })
}

/// Corrected weight surfaces from a PHO result, evaluated on the terms'
/// own grids.
pub fn corrected_surfaces(
    result: &PhoResult,
    part: &StructuredPart,
    s_points_per_term: &[Vec<f64>],
    t_points: &[f64],
) -> Result<Vec<Array2<f64>>> {
    if result.theta_corrected.len() != part.terms.len()
        || s_points_per_term.len() != part.terms.len()
    {
        return Err(Error::ContractViolation(
            "PHO result layout does not match the structured part".to_string(),
        ));
    }
    part.terms
        .iter()
        .zip(&result.theta_corrected)
        .zip(s_points_per_term)
        .map(|((term, theta), s_points)| {
            crate::structured::surface(theta, &term.s_basis, &part.t_basis, s_points, t_points)
        })
        .collect()
}

impl PhoResult {
    pub fn report(&self, part: &StructuredPart) -> PhoReport {
        let before: Vec<f64> = part
            .terms
            .iter()
            .map(|t| t.theta.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let after: Vec<f64> = self
            .theta_corrected
            .iter()
            .map(|t| t.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        PhoReport {
            rank: self.rank,
            residual_norm: self.residual_norm,
            term_norms_before: before,
            term_norms_after: after,
        }
    }
}
