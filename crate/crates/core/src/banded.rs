//! Symmetric positive-definite banded matrices and their Cholesky factors.
//!
//! Storage is the lower band, row by row: row `i` holds `a[i][i - bw ..= i]`
//! in `bw + 1` slots, with slots left of column 0 unused.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw + j - i)
    }

    /// Entry `(i, j)` of the symmetric matrix; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Add `v` to the symmetric pair `(i, j)` and `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = self.bw + j0 - i;
            let mut acc = row[self.bw] * x[i];
            for (j, &a) in (j0..i).zip(&row[off..self.bw]) {
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// In-place Cholesky `A = L Lᵀ`. Fails on a non-positive pivot.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        let w = bw + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * w + (bw + j - i)];
                for k in k0..j {
                    s -= l[i * w + (bw + k - i)] * l[j * w + (bw + k - j)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Factorization {
                            grid: String::new(),
                            pivot: i,
                            value: s,
                        });
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (bw + j - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Overwrite `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = b[i];
            for j in j0..i {
                s -= self.l[i * w + (bw + j - i)] * b[j];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let s = b[i] / self.l[i * w + bw];
            b[i] = s;
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                b[j] -= self.l[i * w + (bw + j - i)] * s;
            }
        }
    }
}
