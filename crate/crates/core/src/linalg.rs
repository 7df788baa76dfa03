//! Small dense matrices for dimensions up to [`MAX_DIM`](crate::MAX_DIM).

use crate::MAX_DIM;

/// Square matrix of order `dim`, row-major, stored inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat {
    dim: usize,
    data: [f64; MAX_DIM * MAX_DIM],
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "matrix order {dim} unsupported");
        Self { dim, data: [0.0; MAX_DIM * MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), rows.len(), "matrix must be square");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    /// Row-major slice of length `dim * dim`, e.g. a Jacobian written by a field.
    pub fn from_row_major(dim: usize, values: &[f64]) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = values[i * dim + j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self[(i, j)]).collect()).collect()
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self[(i, k)] * other[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        let mut out = *self;
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = *self;
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `A v`
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self[(i, j)] * v[j]).sum();
        }
    }

    /// `A^T v`
    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        for j in 0..self.dim {
            out[j] = (0..self.dim).map(|i| self[(i, j)] * v[i]).sum();
        }
    }

    pub fn det(&self) -> f64 {
        let a = |i, j| self[(i, j)];
        match self.dim {
            1 => a(0, 0),
            2 => a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
            _ => {
                a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
                    - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                    + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
            }
        }
    }

    /// Transposed cofactor matrix (the adjugate). Equals `det(A) * A^{-1}`
    /// whenever the inverse exists, and is defined regardless.
    pub fn cofactor_transpose(&self) -> Mat {
        let d = self.dim;
        let mut out = Mat::zeros(d);
        match d {
            1 => out[(0, 0)] = 1.0,
            2 => {
                out[(0, 0)] = self[(1, 1)];
                out[(0, 1)] = -self[(0, 1)];
                out[(1, 0)] = -self[(1, 0)];
                out[(1, 1)] = self[(0, 0)];
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        // cofactor C_{ij}; adjugate entry (j, i)
                        let r = [(i + 1) % 3, (i + 2) % 3];
                        let c = [(j + 1) % 3, (j + 2) % 3];
                        let minor = self[(r[0], c[0])] * self[(r[1], c[1])]
                            - self[(r[0], c[1])] * self[(r[1], c[0])];
                        out[(j, i)] = minor;
                    }
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data[..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.sub(other).data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * MAX_DIM + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * MAX_DIM + j]
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
