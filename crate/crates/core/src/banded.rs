//! Banded LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals, with room for the
/// `kl` extra super-diagonals that row pivoting can fill in.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Storage slot of `(i, j)`; `None` outside the (fill-extended) band.
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (i < self.n && j < self.n && off >= 0 && (off as usize) < self.width)
            .then(|| i * self.width + off as usize)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku && i < self.n && j < self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Accumulate into an entry; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j).expect("band entries have storage");
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j).expect("band entries have storage");
        self.data[s] = v;
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU with partial pivoting.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        // (i, j) lives at i*w + j - i + kl = i*(w-1) + j + kl
        let at = |i: usize, j: usize| i * (w - 1) + j + kl;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Diagnostic(format!("singular banded matrix at column {k}")));
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    self.data.swap(at(k, j), at(p, j));
                }
            }
            let diag = self.data[at(k, k)];
            for i in k + 1..=last_row {
                let l = self.data[at(i, k)] / diag;
                self.data[at(i, k)] = l;
                if l == 0.0 {
                    continue;
                }
                let (row_k, row_i) = (at(k, k + 1), at(i, k + 1));
                for d in 0..last_col - k {
                    let ukj = self.data[row_k + d];
                    self.data[row_i + d] -= l * ukj;
                }
            }
        }
        Ok(BandedLu { m: self, pivots })
    }
}

/// Factors produced by [`BandedMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Overwrite `b` with the solution of `A x = b`.
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let (n, kl, ku, w) = (m.n, m.kl, m.ku, m.width);
        let at = |i: usize, j: usize| i * (w - 1) + j + kl;
        assert_eq!(b.len(), n);
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= m.data[at(i, k)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= m.data[at(i, j)] * b[j];
            }
            b[i] = s / m.data[at(i, i)];
        }
    }
}
