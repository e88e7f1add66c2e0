//! Evaluation grids over functional domains and trapezoidal quadrature.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered evaluation points of a functional domain together with
/// quadrature weights for approximating integrals over that domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl Grid {
    /// Builds a grid from explicit points; weights follow the composite
    /// trapezoid rule.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        let quad_weights = trapezoid_weights(&points)?;
        Ok(Grid {
            points,
            quad_weights,
        })
    }

    /// Equally spaced grid on `[lo, hi]` with `count` points.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid(format!("grid needs >= 2 points, got {count}")));
        }
        if !(lo < hi) {
            return Err(Error::invalid(format!("grid range [{lo}, {hi}] is empty")));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let points: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
        Grid::from_points(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn lo(&self) -> f64 {
        self.points[0]
    }

    pub fn hi(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Domain length `hi - lo`.
    pub fn span(&self) -> f64 {
        self.hi() - self.lo()
    }

    /// Quadrature approximation of the integral of samples over this grid.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!(
                "integrate: {} values on a {}-point grid",
                values.len(),
                self.len()
            )));
        }
        Ok(values
            .iter()
            .zip(&self.quad_weights)
            .map(|(v, w)| v * w)
            .sum())
    }
}

/// Composite trapezoid weights for strictly increasing points:
/// `w_1 = (p_2 - p_1)/2`, `w_r = (p_{r+1} - p_{r-1})/2`,
/// `w_R = (p_R - p_{R-1})/2`.
pub fn trapezoid_weights(points: &[f64]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "trapezoid weights need >= 2 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("non-finite grid point"));
    }
    if points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid points must be strictly increasing"));
    }
    let r = points.len();
    let mut w = vec![0.0; r];
    w[0] = (points[1] - points[0]) / 2.0;
    w[r - 1] = (points[r - 1] - points[r - 2]) / 2.0;
    for i in 1..r - 1 {
        w[i] = (points[i + 1] - points[i - 1]) / 2.0;
    }
    Ok(w)
}

/// Quadratic roughness penalty of a coefficient matrix `theta` (U x K):
/// `lambda_s * trace(Theta P_s Theta^T) + lambda_t * trace(Theta^T P_t Theta)`.
///
/// The s-direction runs along theta's columns (K of them), the t-direction
/// along its rows. Equivalent to the vectorized Kronecker forms
/// `vec(Theta)^T (P_s kron I_U) vec(Theta)` and
/// `vec(Theta)^T (I_K kron P_t) vec(Theta)` with column-major vec.
pub fn penalty_quadratic(
    theta: &Array2<f64>,
    p_s: &Array2<f64>,
    p_t: &Array2<f64>,
    lambda_s: f64,
    lambda_t: f64,
) -> Result<f64> {
    if lambda_s < 0.0 || lambda_t < 0.0 {
        return Err(Error::invalid("penalty weights must be nonnegative"));
    }
    let (u, k) = theta.dim();
    if p_s.dim() != (k, k) {
        return Err(Error::invalid(format!(
            "P_s is {:?}, expected ({k}, {k})",
            p_s.dim()
        )));
    }
    if p_t.dim() != (u, u) {
        return Err(Error::invalid(format!(
            "P_t is {:?}, expected ({u}, {u})",
            p_t.dim()
        )));
    }
    let pen_s = (theta.dot(p_s) * theta).sum();
    let pen_t = (p_t.dot(theta) * theta).sum();
    Ok(lambda_s * pen_s + lambda_t * pen_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::arr2;

    #[test]
    fn uniform_grid_weights() {
        let g = Grid::uniform(0.0, 2.0, 3).unwrap();
        assert_eq!(g.points(), &[0.0, 1.0, 2.0]);
        assert_eq!(g.quad_weights(), &[0.5, 1.0, 0.5]);
    }

    #[test]
    fn two_point_grid() {
        let g = Grid::uniform(0.0, 1.0, 2).unwrap();
        assert_eq!(g.quad_weights(), &[0.5, 0.5]);
    }

    #[test]
    fn weights_sum_to_span() {
        let g = Grid::uniform(0.0, 1.0, 5).unwrap();
        let sum: f64 = g.quad_weights().iter().sum();
        assert_relative_eq!(sum, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn nonuniform_weights_hand_computed() {
        let w = trapezoid_weights(&[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(w, vec![0.5, 1.5, 1.0]);
    }

    #[test]
    fn uniform_interior_weights() {
        let w = trapezoid_weights(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(w, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn rejects_non_monotone() {
        assert!(trapezoid_weights(&[0.0, 1.0, 0.5]).is_err());
        assert!(trapezoid_weights(&[0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_bad_grid_args() {
        assert!(Grid::uniform(0.0, 1.0, 1).is_err());
        assert!(Grid::uniform(1.0, 0.0, 5).is_err());
        assert!(Grid::uniform(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn trapezoid_exact_on_affine() {
        // trapezoid integrates affine functions exactly
        let g = Grid::from_points(vec![0.0, 0.3, 0.55, 0.8, 1.0]).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|s| 2.0 * s + 1.0).collect();
        let integral = g.integrate(&vals).unwrap();
        assert_relative_eq!(integral, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn penalty_zero_for_zero_theta() {
        let theta = Array2::zeros((2, 3));
        let p_s = first_diff_penalty(3);
        let p_t = first_diff_penalty(2);
        assert_eq!(
            penalty_quadratic(&theta, &p_s, &p_t, 1.0, 1.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn penalty_zero_for_constant_theta() {
        let theta = Array2::from_elem((3, 4), 2.5);
        let p_s = first_diff_penalty(4);
        let p_t = first_diff_penalty(3);
        let pen = penalty_quadratic(&theta, &p_s, &p_t, 1.0, 1.0).unwrap();
        assert_relative_eq!(pen, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn penalty_rejects_negative_lambda() {
        let theta = Array2::zeros((2, 2));
        let p = first_diff_penalty(2);
        assert!(penalty_quadratic(&theta, &p, &p, -1.0, 0.0).is_err());
    }

    #[test]
    fn penalty_trace_equals_kronecker_form() {
        // dense Kronecker oracle on a random-ish 2x3 theta
        let theta = arr2(&[[0.7, -1.2, 0.4], [2.1, 0.3, -0.8]]);
        let p_s = first_diff_penalty(3);
        let p_t = first_diff_penalty(2);
        let (u, k) = theta.dim();

        // column-major vec
        let mut vec_theta = Vec::with_capacity(u * k);
        for kk in 0..k {
            for uu in 0..u {
                vec_theta.push(theta[[uu, kk]]);
            }
        }

        // vec^T (P_s kron I_U) vec
        let mut pen_s_kron = 0.0;
        for k1 in 0..k {
            for u1 in 0..u {
                for k2 in 0..k {
                    pen_s_kron += vec_theta[k1 * u + u1] * p_s[[k1, k2]] * vec_theta[k2 * u + u1];
                }
            }
        }
        // vec^T (I_K kron P_t) vec
        let mut pen_t_kron = 0.0;
        for k1 in 0..k {
            for u1 in 0..u {
                for u2 in 0..u {
                    pen_t_kron += vec_theta[k1 * u + u1] * p_t[[u1, u2]] * vec_theta[k1 * u + u2];
                }
            }
        }

        let got_s = penalty_quadratic(&theta, &p_s, &p_t, 1.0, 0.0).unwrap();
        let got_t = penalty_quadratic(&theta, &p_s, &p_t, 0.0, 1.0).unwrap();
        assert_relative_eq!(got_s, pen_s_kron, max_relative = 1e-12);
        assert_relative_eq!(got_t, pen_t_kron, max_relative = 1e-12);
    }

    fn first_diff_penalty(k: usize) -> Array2<f64> {
        crate::basis::first_difference_penalty(k)
    }
}
