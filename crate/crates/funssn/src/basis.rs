//! B-spline basis systems with difference penalties.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// An evaluated B-spline basis on a grid: `eval` holds basis function k at
/// grid point r (K x R), `penalty` is the first-order difference penalty
/// `D^T D` (K x K). Knots and degree are retained so the basis can be
/// evaluated at arbitrary in-domain points (surface meshes, checkpoints).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisSystem {
    knots: Vec<f64>,
    degree: usize,
    num_basis: usize,
    #[serde(skip)]
    eval: Array2<f64>,
    #[serde(skip)]
    penalty: Array2<f64>,
    grid_points: Vec<f64>,
}

impl BasisSystem {
    /// Cubic B-splines by default; `num_basis` functions on clamped uniform
    /// knots spanning the grid range.
    pub fn bspline(grid: &Grid, num_basis: usize, degree: usize) -> Result<Self> {
        if num_basis < degree + 1 {
            return Err(Error::invalid(format!(
                "need at least degree+1 = {} basis functions, got {num_basis}",
                degree + 1
            )));
        }
        let knots = clamped_uniform_knots(grid.lo(), grid.hi(), num_basis, degree);
        let mut eval = Array2::zeros((num_basis, grid.len()));
        for (r, &s) in grid.points().iter().enumerate() {
            let row = eval_bspline_at(&knots, degree, num_basis, s)?;
            for k in 0..num_basis {
                eval[[k, r]] = row[k];
            }
        }
        Ok(BasisSystem {
            knots,
            degree,
            num_basis,
            eval,
            penalty: first_difference_penalty(num_basis),
            grid_points: grid.points().to_vec(),
        })
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// K x R evaluation matrix on the construction grid.
    pub fn eval_matrix(&self) -> &Array2<f64> {
        &self.eval
    }

    pub fn penalty(&self) -> &Array2<f64> {
        &self.penalty
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Evaluates all K basis functions at a single point.
    pub fn eval_at(&self, x: f64) -> Result<Vec<f64>> {
        eval_bspline_at(&self.knots, self.degree, self.num_basis, x)
    }

    /// Rebuilds the evaluation matrix and penalty after deserialization.
    pub fn rebuild(&mut self) -> Result<()> {
        let mut eval = Array2::zeros((self.num_basis, self.grid_points.len()));
        for (r, &s) in self.grid_points.iter().enumerate() {
            let row = eval_bspline_at(&self.knots, self.degree, self.num_basis, s)?;
            for k in 0..self.num_basis {
                eval[[k, r]] = row[k];
            }
        }
        self.eval = eval;
        self.penalty = first_difference_penalty(self.num_basis);
        Ok(())
    }
}

/// `D^T D` for the (K-1) x K first-order difference matrix D. Its null
/// space contains the constant vector.
pub fn first_difference_penalty(k: usize) -> Array2<f64> {
    let mut p = Array2::zeros((k, k));
    for i in 0..k.saturating_sub(1) {
        // row i of D is (..., -1, 1, ...)
        p[[i, i]] += 1.0;
        p[[i + 1, i + 1]] += 1.0;
        p[[i, i + 1]] -= 1.0;
        p[[i + 1, i]] -= 1.0;
    }
    p
}

fn clamped_uniform_knots(lo: f64, hi: f64, num_basis: usize, degree: usize) -> Vec<f64> {
    // num_basis + degree + 1 knots: degree+1 copies at each boundary,
    // num_basis - degree - 1 interior knots equally spaced
    let n_interior = num_basis - degree - 1;
    let mut knots = Vec::with_capacity(num_basis + degree + 1);
    for _ in 0..=degree {
        knots.push(lo);
    }
    let step = (hi - lo) / (n_interior + 1) as f64;
    for i in 1..=n_interior {
        knots.push(lo + step * i as f64);
    }
    for _ in 0..=degree {
        knots.push(hi);
    }
    knots
}

/// Cox-de Boor evaluation of all basis functions at `x`; the right domain
/// endpoint is attributed to the last interval so partition of unity holds
/// on the closed domain.
fn eval_bspline_at(knots: &[f64], degree: usize, num_basis: usize, x: f64) -> Result<Vec<f64>> {
    let lo = knots[0];
    let hi = *knots.last().unwrap();
    if x < lo || x > hi {
        return Err(Error::invalid(format!(
            "point {x} outside basis domain [{lo}, {hi}]"
        )));
    }
    // knot span index: largest i with knots[i] <= x < knots[i+1]
    let span = if x >= hi {
        // last non-degenerate span
        let mut i = num_basis - 1;
        while knots[i] >= knots[i + 1] {
            i -= 1;
        }
        i
    } else {
        let mut i = degree;
        while x >= knots[i + 1] {
            i += 1;
        }
        i
    };

    // triangular scheme: the degree+1 nonzero values on this span
    let mut vals = vec![0.0; degree + 1];
    vals[0] = 1.0;
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { vals[r] / denom };
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }

    let mut out = vec![0.0; num_basis];
    for (r, &v) in vals.iter().enumerate() {
        let idx = span - degree + r;
        if idx < num_basis {
            out[idx] = v;
        }
    }
    Ok(out)
}
