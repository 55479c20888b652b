//! Truncated Karhunen–Loève expansion of a Gaussian field on the unit square.
//!
//! The covariance `exp(-‖x - x'‖²/Δ)` is discretized at the cell centers of a
//! uniform `n × n` grid with quadrature weight `h² = 1/n²`. The kernel factors
//! into one-dimensional kernels in `x` and `y`, so the discrete eigenpairs are
//! products of the eigenpairs of the weighted 1D matrix `h·K₁`: eigenvalues
//! `μ_a μ_b` and modes `φ_a(x_i) φ_b(y_j)`. This gives the same spectrum as the
//! dense `n² × n²` problem at a fraction of the cost, and a canonical basis
//! inside the eigenspaces that symmetry makes degenerate.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{argument, Error, Result};

/// The leading `J` eigenpairs of the discretized covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KlBasis {
    cells: usize,
    corr_length: f64,
    eigenvalues: Vec<f64>,
    /// Mode `j` at cell `(i, k)` is stored at `modes[j][k * cells + i]`.
    modes: Vec<Vec<f64>>,
}

impl KlBasis {
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn corr_length(&self) -> f64 {
        self.corr_length
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues in nonincreasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mode(&self, j: usize) -> &[f64] {
        &self.modes[j]
    }

    /// Quadrature weight of each cell.
    pub fn weight(&self) -> f64 {
        let h = 1.0 / self.cells as f64;
        h * h
    }

    /// One row per mode: `lambda` followed by the `n²` mode values.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["lambda".to_string()];
        header.extend((0..self.cells * self.cells).map(|k| format!("v_{k}")));
        w.write_record(&header).map_err(csv_error)?;
        for (lambda, mode) in self.eigenvalues.iter().zip(&self.modes) {
            let row = std::iter::once(lambda).chain(mode).map(|v| v.to_string());
            w.write_record(row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, cells: usize, corr_length: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut eigenvalues = Vec::new();
        let mut modes = Vec::new();
        for record in r.records() {
            let record = record.map_err(csv_error)?;
            if record.len() != cells * cells + 1 {
                return Err(parse_error(format!("expected {} columns, found {}", cells * cells + 1, record.len())));
            }
            let values = record
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| parse_error(format!("bad number {s:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            eigenvalues.push(values[0]);
            modes.push(values[1..].to_vec());
        }
        Ok(KlBasis { cells, corr_length, eigenvalues, modes })
    }
}

fn csv_error(e: csv::Error) -> Error {
    parse_error(e.to_string())
}

fn parse_error(reason: impl Into<String>) -> Error {
    Error::Parse { path: "KL basis".into(), reason: reason.into() }
}

/// Eigenpairs of the weighted 1D kernel, largest first, each vector scaled to
/// unit weighted norm with its first significant entry positive.
fn one_dimensional(cells: usize, corr_length: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let h = 1.0 / cells as f64;
    let centers: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
    let k = DMatrix::from_fn(cells, cells, |i, j| h * (-(centers[i] - centers[j]).powi(2) / corr_length).exp());
    let eigen = SymmetricEigen::try_new(k, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Solver("KL eigen-decomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..cells).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&a| eigen.eigenvalues[a].max(0.0)).collect();
    let vectors = order
        .iter()
        .map(|&a| {
            let mut v: Vec<f64> = eigen.eigenvectors.column(a).iter().map(|x| x / h.sqrt()).collect();
            orient(&mut v);
            v
        })
        .collect();
    Ok((values, vectors))
}

/// Flips `v` so its first entry that is not negligible is positive.
fn orient(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-10 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// The `modes` leading eigenpairs on an `cells × cells` grid. Equal eigenvalues
/// are ordered by their 1D mode indices `(a, b)`.
pub fn kl_decompose(cells: usize, corr_length: f64, modes: usize) -> Result<KlBasis> {
    if cells == 0 || modes == 0 || modes > cells * cells {
        return Err(argument(format!("cannot take {modes} KL modes on a {cells}x{cells} grid")));
    }
    if !(corr_length > 0.0) || !corr_length.is_finite() {
        return Err(argument("correlation length must be positive"));
    }
    let (mu, phi) = one_dimensional(cells, corr_length)?;
    let k = modes.min(cells);
    let mut pairs: Vec<(f64, usize, usize)> = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| (mu[a] * mu[b], a, b)).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    pairs.truncate(modes);

    let mut eigenvalues = Vec::with_capacity(modes);
    let mut basis = Vec::with_capacity(modes);
    for (lambda, a, b) in pairs {
        let mut mode: Vec<f64> = (0..cells)
            .flat_map(|row| (0..cells).map(move |col| (col, row)))
            .map(|(i, j)| phi[a][i] * phi[b][j])
            .collect();
        orient(&mut mode);
        eigenvalues.push(lambda);
        basis.push(mode);
    }
    Ok(KlBasis { cells, corr_length, eigenvalues, modes: basis })
}

/// Cache file name for a basis.
pub fn cache_path(dir: &Path, cells: usize, corr_length: f64, modes: usize) -> PathBuf {
    dir.join(format!("kl_n{cells}_corr{corr_length}_j{modes}.csv"))
}

/// Reads the basis from `dir` if cached there, otherwise computes and caches it.
pub fn load_or_compute(dir: &Path, cells: usize, corr_length: f64, modes: usize) -> Result<KlBasis> {
    let path = cache_path(dir, cells, corr_length, modes);
    if path.exists() {
        let basis = KlBasis::read_csv(File::open(&path)?, cells, corr_length)?;
        if basis.len() == modes {
            return Ok(basis);
        }
    }
    let basis = kl_decompose(cells, corr_length, modes)?;
    std::fs::create_dir_all(dir)?;
    basis.write_csv(File::create(&path)?)?;
    Ok(basis)
}

/// `a₀ · exp(Σ_j c_j √λ_j ξ_j)` at every cell.
pub fn realize_field(basis: &KlBasis, c: &[f64], a0: f64) -> Result<Vec<f64>> {
    if c.len() != basis.len() {
        return Err(argument(format!("expected {} KL coefficients, got {}", basis.len(), c.len())));
    }
    let mut z = vec![0.0; basis.cells * basis.cells];
    for ((cj, lambda), mode) in c.iter().zip(&basis.eigenvalues).zip(&basis.modes) {
        let w = cj * lambda.sqrt();
        z.iter_mut().zip(mode).for_each(|(zi, m)| *zi += w * m);
    }
    Ok(z.into_iter().map(|v| a0 * v.exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn spectrum_matches_the_dense_problem() {
        let n = 7;
        let h = 1.0 / n as f64;
        let pts: Vec<(f64, f64)> = (0..n * n).map(|k| (((k % n) as f64 + 0.5) * h, ((k / n) as f64 + 0.5) * h)).collect();
        let dense = DMatrix::from_fn(n * n, n * n, |p, q| {
            let d2 = (pts[p].0 - pts[q].0).powi(2) + (pts[p].1 - pts[q].1).powi(2);
            h * h * (-d2 / 0.6).exp()
        });
        let mut oracle: Vec<f64> = SymmetricEigen::new(dense.clone()).eigenvalues.iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        let basis = kl_decompose(n, 0.6, 10).unwrap();
        for (l, o) in basis.eigenvalues().iter().zip(&oracle) {
            assert!((l - o).abs() < 1e-12 * oracle[0], "{l} vs {o}");
        }
        // Each mode satisfies the dense eigen-equation.
        for j in 0..basis.len() {
            let v = nalgebra::DVector::from_column_slice(basis.mode(j));
            let residual = &dense * &v - basis.eigenvalues()[j] * &v;
            assert!(residual.amax() < 1e-10, "mode {j}");
        }
    }

    #[test]
    fn leading_spectrum_decays() {
        let basis = kl_decompose(65, 0.6, 10).unwrap();
        let l = basis.eigenvalues();
        assert!(l[0] > l[1]);
        for w in l.windows(2) {
            assert!(w[0] >= w[1] && w[1] > 0.0);
        }
        assert!(l[9] / l[0] < 1e-2, "ratio {}", l[9] / l[0]);
    }

    #[test]
    fn modes_are_weighted_orthonormal() {
        let basis = kl_decompose(33, 0.6, 10).unwrap();
        let w = basis.weight();
        for i in 0..10 {
            for j in 0..10 {
                let dot: f64 = basis.mode(i).iter().zip(basis.mode(j)).map(|(a, b)| a * b).sum::<f64>() * w;
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-8, "<{i},{j}> = {dot}");
            }
            let first = basis.mode(i).iter().find(|v| v.abs() > 1e-8).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn eigenvalues_bounded_by_trace() {
        let n = 6;
        let full = kl_decompose(n, 0.6, n * n).unwrap();
        let total: f64 = full.eigenvalues().iter().sum();
        // Weighted covariance has unit diagonal times h² on n² cells.
        assert!((total - 1.0).abs() < 1e-12, "{total}");
        let partial: f64 = kl_decompose(n, 0.6, 10).unwrap().eigenvalues().iter().sum();
        assert!(partial <= total);
    }

    #[test]
    fn leading_eigenvalue_converges_under_refinement() {
        let coarse = kl_decompose(33, 0.6, 1).unwrap().eigenvalues()[0];
        let fine = kl_decompose(65, 0.6, 1).unwrap().eigenvalues()[0];
        assert!((coarse - fine).abs() / fine < 0.02);
    }

    #[test]
    fn field_realizations() {
        let basis = kl_decompose(17, 0.6, 10).unwrap();
        assert!(realize_field(&basis, &[0.0; 10], 1.0).unwrap().iter().all(|&a| a == 1.0));
        assert!(realize_field(&basis, &[0.0; 9], 1.0).is_err());

        let c1: Vec<f64> = (0..10).map(|j| 0.3 * j as f64 - 1.0).collect();
        let c2: Vec<f64> = (0..10).map(|j| (j as f64).sin()).collect();
        let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
        let a1 = realize_field(&basis, &c1, 1.0).unwrap();
        let a2 = realize_field(&basis, &c2, 1.0).unwrap();
        let a12 = realize_field(&basis, &sum, 1.0).unwrap();
        for k in 0..a1.len() {
            assert!((a12[k].ln() - a1[k].ln() - a2[k].ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn field_variance_follows_the_spectrum() {
        let basis = kl_decompose(17, 0.6, 10).unwrap();
        let cells = 17 * 17;
        let mut r = rng::stream(2, rng::MONTE_CARLO_STREAM);
        let draws = 10_000;
        let mut sum = vec![0.0; cells];
        let mut sum2 = vec![0.0; cells];
        for _ in 0..draws {
            let c: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut r)).collect();
            for (k, a) in realize_field(&basis, &c, 1.0).unwrap().iter().enumerate() {
                let z = a.ln();
                sum[k] += z;
                sum2[k] += z * z;
            }
        }
        for k in 0..cells {
            let mean = sum[k] / draws as f64;
            let var = sum2[k] / draws as f64 - mean * mean;
            let expected: f64 = (0..10).map(|j| basis.eigenvalues()[j] * basis.mode(j)[k].powi(2)).sum();
            assert!((var / expected - 1.0).abs() < 0.1, "cell {k}: {var} vs {expected}");
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let computed = load_or_compute(dir.path(), 9, 0.6, 10).unwrap();
        assert!(cache_path(dir.path(), 9, 0.6, 10).exists());
        let cached = load_or_compute(dir.path(), 9, 0.6, 10).unwrap();
        assert_eq!(computed, cached);
    }
}
