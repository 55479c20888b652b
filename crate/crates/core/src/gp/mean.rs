//! Least-squares polynomial prior mean `μ₀`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::problem::InputPoint;

/// Relative pivot size below which the design is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanDegree {
    Constant,
    Linear,
    Quadratic,
}

impl MeanDegree {
    pub fn basis_size(self, d: usize) -> usize {
        match self {
            MeanDegree::Constant => 1,
            MeanDegree::Linear => 1 + d,
            MeanDegree::Quadratic => quadratic_basis_size(d),
        }
    }

    fn lower(self) -> Option<MeanDegree> {
        match self {
            MeanDegree::Quadratic => Some(MeanDegree::Linear),
            MeanDegree::Linear => Some(MeanDegree::Constant),
            MeanDegree::Constant => None,
        }
    }
}

/// `1 + d + d(d+1)/2`: constant, linear and all second-order monomials.
pub fn quadratic_basis_size(d: usize) -> usize {
    1 + d + d * (d + 1) / 2
}

/// A polynomial in `x - origin` with monomials ordered as
/// `1, u_1..u_d, u_1u_1, u_1u_2, .., u_1u_d, u_2u_2, .., u_du_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticMean {
    origin: Vec<f64>,
    degree: MeanDegree,
    coefficients: Vec<f64>,
}

impl QuadraticMean {
    /// Fits `values` over the richest basis the points support, degrading from
    /// quadratic to linear to constant when the design is rank deficient.
    pub fn fit_about(points: &[InputPoint], values: &[f64], origin: &[f64]) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(argument("mean fit needs equally many points and values"));
        }
        let d = origin.len();
        if points.iter().any(|p| p.len() != d) {
            return Err(argument("mean fit point dimension mismatch"));
        }
        let mut degree = Some(MeanDegree::Quadratic);
        while let Some(deg) = degree {
            if deg.basis_size(d) <= points.len() {
                if let Some(coefficients) = least_squares(points, values, origin, deg) {
                    return Ok(QuadraticMean { origin: origin.to_vec(), degree: deg, coefficients });
                }
            }
            degree = deg.lower();
        }
        Err(Error::Surrogate("mean regression failed even for a constant".into()))
    }

    pub fn degree(&self) -> MeanDegree {
        self.degree
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut row = vec![0.0; self.coefficients.len()];
        fill_basis(x, &self.origin, self.degree, &mut row);
        row.iter().zip(&self.coefficients).map(|(b, c)| b * c).sum()
    }
}

/// Least-squares quadratic fit in the raw coordinates (origin at zero).
pub fn fit_quadratic_mean(points: &[InputPoint], values: &[f64]) -> Result<QuadraticMean> {
    let d = points.first().map(|p| p.len()).ok_or_else(|| argument("empty support"))?;
    QuadraticMean::fit_about(points, values, &vec![0.0; d])
}

fn fill_basis(x: &[f64], origin: &[f64], degree: MeanDegree, row: &mut [f64]) {
    row[0] = 1.0;
    if degree == MeanDegree::Constant {
        return;
    }
    let d = origin.len();
    for i in 0..d {
        row[1 + i] = x[i] - origin[i];
    }
    if degree == MeanDegree::Quadratic {
        let mut k = 1 + d;
        for i in 0..d {
            for j in i..d {
                row[k] = row[1 + i] * row[1 + j];
                k += 1;
            }
        }
    }
}

/// Column-equilibrated, column-pivoted QR least squares. `None` when the
/// design is numerically rank deficient.
fn least_squares(points: &[InputPoint], values: &[f64], origin: &[f64], degree: MeanDegree) -> Option<Vec<f64>> {
    let n = points.len();
    let m = degree.basis_size(origin.len());
    let mut a = DMatrix::<f64>::zeros(n, m);
    let mut row = vec![0.0; m];
    for (r, p) in points.iter().enumerate() {
        fill_basis(p, origin, degree, &mut row);
        for c in 0..m {
            a[(r, c)] = row[c];
        }
    }
    let mut norms = vec![0.0; m];
    for (c, norm) in norms.iter_mut().enumerate() {
        *norm = a.column(c).norm();
        if *norm == 0.0 {
            return None;
        }
        a.column_mut(c).scale_mut(1.0 / *norm);
    }
    let qr = a.col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    if (0..m).any(|k| r[(k, k)].abs() <= RANK_TOLERANCE * r00) {
        return None;
    }
    let qtb = qr.q().transpose() * DVector::from_column_slice(values);
    let mut z = r.solve_upper_triangular(&qtb)?;
    qr.p().inv_permute_rows(&mut z);
    Some(z.iter().zip(&norms).map(|(c, s)| c / s).collect())
}
