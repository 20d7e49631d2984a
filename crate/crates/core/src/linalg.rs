//! Small dense kernels: Cholesky for the R×R normal equations, a banded
//! Cholesky for Laplacian-type operators, and SVD-based polar factors.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

use crate::error::{CmtfError, Result};

/// Lower-triangular Cholesky factor of a small symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // row-major lower triangle, full n×n storage
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(m: ArrayView2<'_, f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(CmtfError::Dimension(format!(
                "cholesky of non-square {}x{} matrix",
                n,
                m.ncols()
            )));
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = m[[i, j]];
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(CmtfError::Singular(format!("pivot {i} is {s:e}")));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `S x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for p in 0..i {
                s -= self.l[i * n + p] * b[p];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for p in i + 1..n {
                s -= self.l[p * n + i] * b[p];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Returns `X` with `X S = rhs`, i.e. every row of `rhs` solved against `S`.
    pub fn solve_right(&self, rhs: &Array2<f64>) -> Array2<f64> {
        assert_eq!(rhs.ncols(), self.n, "rhs column count must match system size");
        let mut out = rhs.as_standard_layout().into_owned();
        if self.n > 0 {
            let buf = out.as_slice_mut().expect("standard layout");
            for row in buf.chunks_exact_mut(self.n) {
                self.solve_in_place(row);
            }
        }
        out
    }
}

/// Largest `|i - j|` over the nonzero entries of `m`.
pub fn bandwidth(m: &Array2<f64>) -> usize {
    let mut bw = 0;
    for ((i, j), v) in m.indexed_iter() {
        if *v != 0.0 {
            bw = bw.max(i.abs_diff(j));
        }
    }
    bw
}

/// Cholesky factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    // l[i * (bw + 1) + (j + bw - i)] holds L[i, j] for i - bw <= j <= i
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn new(m: &Array2<f64>, bw: usize) -> Result<Self> {
        if m.ncols() != m.nrows() {
            return Err(CmtfError::Dimension("banded cholesky of non-square matrix".into()));
        }
        Self::from_band(m.nrows(), bw, |i, j| m[[i, j]])
    }

    /// Factorizes the `n×n` band matrix whose entry `(i, j)`, `j <= i <= j + bw`,
    /// is `entry(i, j)`.
    pub fn from_band(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = entry(i, j);
                let plo = lo.max(j.saturating_sub(bw));
                for p in plo..j {
                    s -= l[at(i, p)] * l[at(j, p)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(CmtfError::Singular(format!("band pivot {i} is {s:e}")));
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        for i in 0..n {
            let mut s = b[i];
            for p in i.saturating_sub(bw)..i {
                s -= self.l[at(i, p)] * b[p];
            }
            b[i] = s / self.l[at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for p in i + 1..(i + bw + 1).min(n) {
                s -= self.l[at(p, i)] * b[p];
            }
            b[i] = s / self.l[at(i, i)];
        }
    }
}

pub fn to_nalgebra(m: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Orthonormal polar factor `U Vᵀ` of a tall matrix from its thin SVD.
pub fn polar_factor(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if m.nrows() < m.ncols() {
        return Err(CmtfError::Dimension(format!(
            "polar factor needs rows >= cols, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let svd = to_nalgebra(m).svd(true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return Err(CmtfError::NonFinite("svd".into()));
    };
    Ok(from_nalgebra(&(u * vt)))
}

/// Above this many result columns the products below defer to `dot`.
const THIN_COLS: usize = 16;

fn dot4(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (cx, cy) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: f64 = cx.remainder().iter().zip(cy.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in cx.zip(cy) {
        for l in 0..4 {
            acc[l] += a[l] * b[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `a b` for a `b` with few columns, one dot product per output entry.
pub fn dot_thin(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, k) = a.dim();
    let n = b.ncols();
    assert_eq!(k, b.nrows(), "inner dimensions differ");
    if n > THIN_COLS {
        return a.dot(&b);
    }
    let mut out = vec![0.0; m * n];
    if n == 0 || k == 0 {
        return Array2::from_shape_vec((m, n), out).expect("shape matches buffer");
    }
    let a = a.as_standard_layout();
    let a = a.as_slice().expect("standard layout");
    if k < THIN_COLS {
        let b = b.as_standard_layout();
        let b = b.as_slice().expect("standard layout");
        for (arow, orow) in a.chunks_exact(k).zip(out.chunks_exact_mut(n)) {
            for (x, brow) in arow.iter().zip(b.chunks_exact(n)) {
                axpy(*x, brow, orow);
            }
        }
        return Array2::from_shape_vec((m, n), out).expect("shape matches buffer");
    }
    let bt = b.t().as_standard_layout().into_owned();
    let bt = bt.as_slice().expect("standard layout");
    for (arow, orow) in a.chunks_exact(k).zip(out.chunks_exact_mut(n)) {
        for (o, bcol) in orow.iter_mut().zip(bt.chunks_exact(k)) {
            *o = dot4(arow, bcol);
        }
    }
    Array2::from_shape_vec((m, n), out).expect("shape matches buffer")
}

/// `aᵀ b` for a `b` with few columns, accumulated as scaled rows of `a`.
pub fn t_dot_thin(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (i, j) = a.dim();
    let n = b.ncols();
    assert_eq!(i, b.nrows(), "row counts differ");
    if n > THIN_COLS {
        return a.t().dot(&b);
    }
    let mut out_t = vec![0.0; n * j];
    if n > 0 && j > 0 {
        let a = a.as_standard_layout();
        let b = b.as_standard_layout();
        let (a, b) = (a.as_slice().expect("standard layout"), b.as_slice().expect("standard layout"));
        for (arow, brow) in a.chunks_exact(j).zip(b.chunks_exact(n)) {
            for (x, orow) in brow.iter().zip(out_t.chunks_exact_mut(j)) {
                axpy(*x, arow, orow);
            }
        }
    }
    Array2::from_shape_vec((n, j), out_t)
        .expect("shape matches buffer")
        .reversed_axes()
        .as_standard_layout()
        .into_owned()
}

/// `mᵀ m`
pub fn gram(m: ArrayView2<'_, f64>) -> Array2<f64> {
    t_dot_thin(m, m)
}

pub fn all_finite(m: &Array2<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_right_hand_side() {
        let s = array![[4.0, 1.0], [1.0, 3.0]];
        let chol = Cholesky::new(s.view()).unwrap();
        let rhs = array![[1.0, 2.0], [0.0, -1.0], [3.0, 3.0]];
        let x = chol.solve_right(&rhs);
        let back = x.dot(&s);
        for (a, b) in back.iter().zip(rhs.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let s = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(Cholesky::new(s.view()), Err(CmtfError::Singular(_))));
    }

    #[test]
    fn banded_matches_dense() {
        let n = 7;
        let mut m = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            m[[i, i]] = 4.0 + i as f64 * 0.1;
            if i + 1 < n {
                m[[i, i + 1]] = -1.0;
                m[[i + 1, i]] = -1.0;
            }
            if i + 2 < n {
                m[[i, i + 2]] = 0.5;
                m[[i + 2, i]] = 0.5;
            }
        }
        assert_eq!(bandwidth(&m), 2);
        let band = BandedCholesky::new(&m, 2).unwrap();
        let dense = Cholesky::new(m.view()).unwrap();
        let mut a: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = a.clone();
        band.solve_in_place(&mut a);
        dense.solve_in_place(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn thin_products_match_dot() {
        let a = Array2::from_shape_fn((5, 7), |(i, j)| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let b = Array2::from_shape_fn((7, 3), |(i, j)| ((i * 3 + j) as f64).sin());
        let c = Array2::from_shape_fn((5, 3), |(i, j)| ((i + 2 * j) as f64).cos());
        let close = |x: &Array2<f64>, y: &Array2<f64>| (x - y).iter().all(|v| v.abs() < 1e-13);
        assert!(close(&dot_thin(a.view(), b.view()), &a.dot(&b)));
        assert!(close(&dot_thin(b.t(), a.t()), &b.t().dot(&a.t())));
        assert!(close(&t_dot_thin(a.view(), c.view()), &a.t().dot(&c)));
        assert!(close(&gram(c.view()), &c.t().dot(&c)));
        let wide = Array2::from_shape_fn((4, 23), |(i, j)| ((i * 23 + j) as f64 * 0.37).cos());
        let tall = Array2::from_shape_fn((23, 2), |(i, j)| (i as f64 - j as f64) * 0.05);
        assert!(close(&dot_thin(wide.view(), tall.view()), &wide.dot(&tall)));
    }

    #[test]
    fn polar_factor_is_orthonormal() {
        let m = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let p = polar_factor(m.view()).unwrap();
        let g = gram(p.view());
        assert!((g[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((g[[1, 1]] - 1.0).abs() < 1e-12);
        assert!(g[[0, 1]].abs() < 1e-12);
    }
}
