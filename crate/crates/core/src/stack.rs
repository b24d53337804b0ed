//! Row-major `n x d` matrices holding one row per agent.

use std::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq)]
pub struct Stack {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Stack {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, data: vec![0.0; n * d] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            assert_eq!(r.len(), d, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { n, d, data }
    }

    /// Every row equal to `row`.
    pub fn broadcast(n: usize, row: &[f64]) -> Self {
        let mut data = Vec::with_capacity(n * row.len());
        for _ in 0..n {
            data.extend_from_slice(row);
        }
        Self { n, d: row.len(), data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1)).take(self.n)
    }

    pub fn rows_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        let n = self.n;
        self.data.chunks_exact_mut(self.d.max(1)).take(n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn mean_row(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        let inv = 1.0 / self.n as f64;
        m.iter_mut().for_each(|v| *v *= inv);
        m
    }

    /// `||self - 1 mean^T||_F^2`.
    pub fn spread_sq(&self) -> f64 {
        let m = self.mean_row();
        self.rows().map(|r| r.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn sub(&self, other: &Stack) -> Stack {
        assert_eq!((self.n, self.d), (other.n, other.d));
        Stack {
            n: self.n,
            d: self.d,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Stack) -> f64 {
        assert_eq!((self.n, self.d), (other.n, other.d));
        self.data.iter().zip(&other.data).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Index of the first row containing a non-finite value.
    pub fn first_non_finite_row(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite()).map(|p| p / self.d.max(1))
    }

    /// Dense product `m * self` for an `n x n` matrix `m`.
    pub fn left_mul(&self, m: &nalgebra::DMatrix<f64>) -> Stack {
        assert_eq!(m.ncols(), self.n);
        let mut out = Stack::zeros(m.nrows(), self.d);
        for i in 0..m.nrows() {
            for j in 0..self.n {
                let w = m[(i, j)];
                if w != 0.0 {
                    let src = &self.data[j * self.d..(j + 1) * self.d];
                    for (o, s) in out.row_mut(i).iter_mut().zip(src) {
                        *o += w * s;
                    }
                }
            }
        }
        out
    }

    /// Applies a row permutation: row `i` of the result is row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Stack {
        let rows: Vec<Vec<f64>> = perm.iter().map(|&p| self.row(p).to_vec()).collect();
        Stack::from_rows(&rows)
    }
}

impl Index<(usize, usize)> for Stack {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.d + j]
    }
}

impl IndexMut<(usize, usize)> for Stack {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.d + j]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
