//! Least squares by Householder QR.

use crate::error::{Error, Result};

/// A pivot below this fraction of its column's norm means the column is
/// (numerically) spanned by the preceding ones.
const RELATIVE_PIVOT_TOL: f64 = 1e-10;
/// Largest accepted ratio between the extreme diagonal entries of `R`.
const MAX_CONDITION: f64 = 1e12;

/// Column-major design matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    n: usize,
    cols: Vec<f64>,
}

impl Design {
    pub fn new(n: usize) -> Self {
        Self { n, cols: Vec::new() }
    }

    pub fn push_column(&mut self, col: impl IntoIterator<Item = f64>) {
        let start = self.cols.len();
        self.cols.extend(col);
        assert_eq!(self.cols.len() - start, self.n, "column length");
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len().checked_div(self.n).unwrap_or(0)
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub rss: f64,
}

/// Minimizes `‖y − X β‖²`.
pub fn ols(design: &Design, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = (design.n_rows(), design.n_cols());
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{n} rows but {} responses", y.len())));
    }
    if p == 0 || n < p {
        return Err(Error::SingularRegression(format!("{n} rows for {p} columns")));
    }
    let mut a = design.cols.clone();
    let mut b = y.to_vec();
    let mut diag = vec![0.0; p];
    let mut v = vec![0.0; n];
    for k in 0..p {
        let col = &a[k * n..(k + 1) * n];
        let full_norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm = col[k..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || norm <= RELATIVE_PIVOT_TOL * full_norm {
            return Err(Error::SingularRegression(format!("column {k} is collinear")));
        }
        let alpha = if col[k] > 0.0 { -norm } else { norm };
        v[k..].copy_from_slice(&col[k..]);
        v[k] -= alpha;
        let vv: f64 = v[k..].iter().map(|x| x * x).sum();
        diag[k] = alpha;
        let reflect = |target: &mut [f64]| {
            let s: f64 = v[k..].iter().zip(&target[k..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * s / vv;
            for (t, vi) in target[k..].iter_mut().zip(&v[k..]) {
                *t -= f * vi;
            }
        };
        for j in k + 1..p {
            reflect(&mut a[j * n..(j + 1) * n]);
        }
        reflect(&mut b);
    }
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    if hi / lo > MAX_CONDITION {
        return Err(Error::SingularRegression(format!("condition estimate {:.3e}", hi / lo)));
    }
    let mut coef = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in k + 1..p {
            s -= a[j * n + k] * coef[j];
        }
        coef[k] = s / diag[k];
    }
    let rss = b[p..].iter().map(|x| x * x).sum();
    Ok(OlsFit { coef, rss })
}
