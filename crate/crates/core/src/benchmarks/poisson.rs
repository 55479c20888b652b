//! Cell-centered finite-volume solver for `∇·(a∇u) = f` on the unit square
//! with `u = 0` on the boundary.
//!
//! Interior faces use the harmonic mean of the two adjacent conductivities;
//! boundary faces see the wall half a cell away. The resulting symmetric
//! positive definite system (for `-∇·(a∇u)`) has half-bandwidth `n` in the
//! natural ordering and is solved by banded Cholesky.

use crate::error::{argument, Error, Result};

/// Relative residual every solve must reach.
const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// A uniform grid of `cells × cells` square cells on `[0, 1]²`. Cell `(i, j)`
/// has center `((i + ½)h, (j + ½)h)` and linear index `j·cells + i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    cells: usize,
}

impl Grid {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(argument("a Poisson grid needs at least two cells per side"));
        }
        Ok(Grid { cells })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn len(&self) -> usize {
        self.cells * self.cells
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cells + i
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing()
    }
}

/// Cell-center values of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    grid: Grid,
    values: Vec<f64>,
}

impl PoissonSolution {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_cell(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Bilinear interpolation between cell centers, with `u = 0` on the walls.
    pub fn interpolate(&self, x: f64, y: f64) -> Result<f64> {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(argument(format!("({x}, {y}) lies outside the unit square")));
        }
        let n = self.grid.cells;
        // Node k of the padded axis: 0 at the wall, k in 1..=n at centers, n+1 at the far wall.
        let coord = |k: usize| match k {
            0 => 0.0,
            k if k == n + 1 => 1.0,
            k => self.grid.center(k - 1),
        };
        let bracket = |t: f64| {
            let k = ((t * n as f64 + 0.5).floor() as usize).min(n);
            (k, (t - coord(k)) / (coord(k + 1) - coord(k)))
        };
        let value = |a: usize, b: usize| {
            if a == 0 || b == 0 || a == n + 1 || b == n + 1 {
                0.0
            } else {
                self.at_cell(a - 1, b - 1)
            }
        };
        let (kx, tx) = bracket(x);
        let (ky, ty) = bracket(y);
        Ok((1.0 - tx) * (1.0 - ty) * value(kx, ky)
            + tx * (1.0 - ty) * value(kx + 1, ky)
            + (1.0 - tx) * ty * value(kx, ky + 1)
            + tx * ty * value(kx + 1, ky + 1))
    }
}

/// Lower Cholesky factor of a symmetric band matrix, stored by rows: entry
/// `(i, i - o)` for `o ≤ bandwidth` lives at `i·(bandwidth + 1) + o`.
struct BandCholesky {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    fn factor(n: usize, bandwidth: usize, mut data: Vec<f64>) -> Result<Self> {
        let w = bandwidth + 1;
        for i in 0..n {
            let first = i.saturating_sub(bandwidth);
            for k in first..=i {
                let start = first.max(k.saturating_sub(bandwidth));
                let mut s = data[i * w + (i - k)];
                for m in start..k {
                    s -= data[i * w + (i - m)] * data[k * w + (k - m)];
                }
                if k == i {
                    if !(s > 0.0) {
                        return Err(Error::Solver(format!("matrix not positive definite at row {i}")));
                    }
                    data[i * w] = s.sqrt();
                } else {
                    data[i * w + (i - k)] = s / data[k * w];
                }
            }
        }
        Ok(BandCholesky { n, bandwidth, data })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let w = self.bandwidth + 1;
        let mut x = rhs.to_vec();
        for i in 0..self.n {
            let mut s = x[i];
            for m in i.saturating_sub(self.bandwidth)..i {
                s -= self.data[i * w + (i - m)] * x[m];
            }
            x[i] = s / self.data[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for r in i + 1..(i + self.bandwidth + 1).min(self.n) {
                s -= self.data[r * w + (r - i)] * x[r];
            }
            x[i] = s / self.data[i * w];
        }
        x
    }
}

/// Solves `∇·(a∇u) = f` with constant forcing `f` and cellwise conductivity `a`.
pub fn solve_poisson(a: &[f64], grid: Grid, forcing: f64) -> Result<PoissonSolution> {
    let n = grid.cells;
    if a.len() != grid.len() {
        return Err(argument(format!("conductivity has {} values for {} cells", a.len(), grid.len())));
    }
    if a.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(argument("conductivity must be positive and finite"));
    }
    let harmonic = |p: f64, q: f64| 2.0 * p * q / (p + q);

    // Rows of h²·(-∇·a∇), lower band only; the full operator is kept for the
    // residual check.
    let w = n + 1;
    let mut band = vec![0.0; grid.len() * w];
    let mut diag = vec![0.0; grid.len()];
    let mut west = vec![0.0; grid.len()];
    let mut south = vec![0.0; grid.len()];
    for j in 0..n {
        for i in 0..n {
            let p = grid.index(i, j);
            let ap = a[p];
            let mut d = 0.0;
            if i == 0 {
                d += 2.0 * ap;
            } else {
                let c = harmonic(ap, a[p - 1]);
                d += c;
                west[p] = -c;
            }
            if i == n - 1 {
                d += 2.0 * ap;
            } else {
                d += harmonic(ap, a[p + 1]);
            }
            if j == 0 {
                d += 2.0 * ap;
            } else {
                let c = harmonic(ap, a[p - n]);
                d += c;
                south[p] = -c;
            }
            if j == n - 1 {
                d += 2.0 * ap;
            } else {
                d += harmonic(ap, a[p + n]);
            }
            diag[p] = d;
            band[p * w] = d;
            band[p * w + 1] = west[p];
            band[p * w + n] = south[p];
        }
    }
    let h2 = grid.spacing().powi(2);
    let rhs = vec![-forcing * h2; grid.len()];
    let factor = BandCholesky::factor(grid.len(), n, band)?;
    let u = factor.solve(&rhs);

    let apply = |p: usize| {
        let mut s = diag[p] * u[p];
        if p % n != 0 {
            s += west[p] * u[p - 1];
        }
        if p % n != n - 1 {
            s += west[p + 1] * u[p + 1];
        }
        if p >= n {
            s += south[p] * u[p - n];
        }
        if p + n < grid.len() {
            s += south[p + n] * u[p + n];
        }
        s
    };
    let residual = (0..grid.len()).map(|p| (apply(p) - rhs[p]).powi(2)).sum::<f64>().sqrt();
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(residual <= RESIDUAL_TOLERANCE * rhs_norm) {
        return Err(Error::Solver(format!("relative residual {} exceeds tolerance", residual / rhs_norm)));
    }
    Ok(PoissonSolution { grid, values: u })
}

/// `u(½, ½)` for `∇²u = 1` with zero boundary values, from the double sine
/// series over odd `m, n ≤ 2·terms - 1`.
pub fn fourier_center_value(terms: usize) -> f64 {
    let pi4 = std::f64::consts::PI.powi(4);
    let mut total = 0.0;
    for a in 0..terms {
        let m = (2 * a + 1) as f64;
        let sm = if a % 2 == 0 { 1.0 } else { -1.0 };
        for b in 0..terms {
            let n = (2 * b + 1) as f64;
            let sn = if b % 2 == 0 { 1.0 } else { -1.0 };
            total += sm * sn / (m * n * (m * m + n * n));
        }
    }
    -16.0 / pi4 * total
}
