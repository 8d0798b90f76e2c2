//! Banded LU with partial pivoting, LAPACK band-storage style, plus a
//! bordered-system solver used by the collocation engine.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Band matrix with `kl` sub- and `ku` super-diagonals.  Storage follows the
/// LAPACK convention with `kl` extra rows for pivoting fill-in: entry
/// `(i, j)` lives at `data[kl + ku + i - j][j]` for `max(0, j-ku-kl) <= i`.
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    /// Row-major `(2*kl + ku + 1) x n`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let rows = 2 * kl + ku + 1;
        Self { n, kl, ku, data: vec![0.0; rows * n] }
    }

    pub fn reset(&mut self) {
        self.data.fill(0.0);
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let r = self.kl + self.ku + i - j;
        r * self.n + j
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && i + self.ku + self.kl >= j
        // storage band includes the kl fill-in rows above ku
    }

    /// In-place LU with partial pivoting.  Returns the pivot vector.
    pub fn factorize(&mut self) -> Result<Vec<usize>> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let kv = kl + ku; // superdiagonals including fill-in
        let mut piv = vec![0usize; n];
        for j in 0..n {
            // Pivot search in column j, rows j..=min(n-1, j+kl).
            let i_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut vmax = self.get(j, j).abs();
            for i in (j + 1)..=i_max {
                let v = self.data[(kv + i - j) * n + j].abs();
                if v > vmax {
                    vmax = v;
                    p = i;
                }
            }
            if vmax == 0.0 {
                return Err(Error::Collocation(format!("singular band matrix at column {j}")));
            }
            piv[j] = p;
            // Swap rows j and p across the band columns j..min(n-1, j+kv+kl)?
            let j_hi = (j + kv).min(n - 1);
            if p != j {
                for col in j..=j_hi {
                    let a = (kv + j - col) * n + col;
                    let b = (kv + p - col) * n + col;
                    self.data.swap(a, b);
                }
            }
            let diag = self.data[kv * n + j];
            for i in (j + 1)..=i_max {
                let k = (kv + i - j) * n + j;
                let m = self.data[k] / diag;
                self.data[k] = m;
                if m != 0.0 {
                    for col in (j + 1)..=j_hi {
                        let src = (kv + j - col) * n + col;
                        let dst = (kv + i - col) * n + col;
                        self.data[dst] -= m * self.data[src];
                    }
                }
            }
        }
        Ok(piv)
    }

    /// Solves `A x = b` in place given the factorization pivots.
    pub fn solve(&self, piv: &[usize], b: &mut [f64]) {
        let n = self.n;
        let kl = self.kl;
        let kv = kl + self.ku;
        // Forward substitution with pivoting.
        for j in 0..n {
            let p = piv[j];
            if p != j {
                b.swap(j, p);
            }
            let i_max = (j + kl).min(n - 1);
            for i in (j + 1)..=i_max {
                let m = self.data[(kv + i - j) * n + j];
                if m != 0.0 {
                    b[i] -= m * b[j];
                }
            }
        }
        // Back substitution.
        for j in (0..n).rev() {
            let j_hi = (j + kv).min(n - 1);
            let mut s = b[j];
            for col in (j + 1)..=j_hi {
                s -= self.data[(kv + j - col) * n + col] * b[col];
            }
            b[j] = s / self.data[kv * n + j];
        }
    }
}

/// Solves the bordered system `[B C; R S] [x; w] = [b; r]` where `B` is
/// banded and the border width is small, by block elimination.
pub struct BorderedSolver {
    pub band: BandMatrix,
    /// Dense border columns, `n x p`, column-major by column vector.
    pub cols: Vec<Vec<f64>>,
    /// Dense border rows, `p x n`.
    pub rows: Vec<Vec<f64>>,
    /// Corner block, `p x p`, row-major.
    pub corner: DMatrix<f64>,
}

impl BorderedSolver {
    pub fn new(n: usize, kl: usize, ku: usize, p: usize) -> Self {
        Self {
            band: BandMatrix::zeros(n, kl, ku),
            cols: vec![vec![0.0; n]; p],
            rows: vec![vec![0.0; n]; p],
            corner: DMatrix::zeros(p, p),
        }
    }

    pub fn reset(&mut self) {
        self.band.reset();
        for c in &mut self.cols {
            c.fill(0.0);
        }
        for r in &mut self.rows {
            r.fill(0.0);
        }
        self.corner.fill(0.0);
    }

    /// Solves for `(x, w)` given the core RHS `b` and border RHS `r`.
    pub fn solve(&mut self, b: &[f64], r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.band.n;
        let p = self.cols.len();
        let piv = self.band.factorize()?;
        let mut xb = b.to_vec();
        self.band.solve(&piv, &mut xb);
        let mut xc: Vec<Vec<f64>> = Vec::with_capacity(p);
        for c in &self.cols {
            let mut col = c.clone();
            self.band.solve(&piv, &mut col);
            xc.push(col);
        }
        // Schur complement S - R * B^-1 C (p x p).
        let mut schur = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let mut dot = 0.0;
                for k in 0..n {
                    dot += self.rows[i][k] * xc[j][k];
                }
                schur[(i, j)] = self.corner[(i, j)] - dot;
            }
        }
        let mut rhs = nalgebra::DVector::zeros(p);
        for i in 0..p {
            let mut dot = 0.0;
            for k in 0..n {
                dot += self.rows[i][k] * xb[k];
            }
            rhs[i] = r[i] - dot;
        }
        let lu = schur.lu();
        let w = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Collocation("singular bordered Schur complement".into()))?;
        let mut x = xb;
        for j in 0..p {
            let wj = w[j];
            if wj != 0.0 {
                for k in 0..n {
                    x[k] -= xc[j][k] * wj;
                }
            }
        }
        Ok((x, w.as_slice().to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: &mut u64) -> (BandMatrix, DMatrix<f64>) {
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        let mut rng = move || {
            *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((*seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for i in 0..n {
            for j in 0..n {
                if j + kl >= i && i + ku >= j {
                    let v = rng() + if i == j { 4.0 } else { 0.0 };
                    band.set(i, j, v);
                    dense[(i, j)] = v;
                }
            }
        }
        (band, dense)
    }

    #[test]
    fn band_lu_matches_dense() {
        let mut seed = 42u64;
        for &(n, kl, ku) in &[(12usize, 2usize, 3usize), (40, 5, 5), (25, 1, 4)] {
            let (mut band, dense) = random_banded(n, kl, ku, &mut seed);
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let piv = band.factorize().unwrap();
            let mut x = b.clone();
            band.solve(&piv, &mut x);
            let xd = dense.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-10, "n={n} i={i}: {} vs {}", x[i], xd[i]);
            }
        }
    }

    #[test]
    fn bordered_solve_matches_dense() {
        let n = 20;
        let p = 3;
        let mut seed = 7u64;
        let (band, dense_core) = random_banded(n, 3, 2, &mut seed);
        let mut solver = BorderedSolver { band, cols: vec![], rows: vec![], corner: DMatrix::zeros(p, p) };
        let mut rng = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let mut full = DMatrix::zeros(n + p, n + p);
        full.view_mut((0, 0), (n, n)).copy_from(&dense_core);
        for j in 0..p {
            let mut col = vec![0.0; n];
            for (i, item) in col.iter_mut().enumerate() {
                *item = rng();
                full[(i, n + j)] = *item;
            }
            solver.cols.push(col);
        }
        for i in 0..p {
            let mut row = vec![0.0; n];
            for (j, item) in row.iter_mut().enumerate() {
                *item = rng();
                full[(n + i, j)] = *item;
            }
            solver.rows.push(row);
            for j in 0..p {
                let v = rng() + if i == j { 2.0 } else { 0.0 };
                solver.corner[(i, j)] = v;
                full[(n + i, n + j)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let r: Vec<f64> = (0..p).map(|i| i as f64 + 0.5).collect();
        let (x, w) = solver.solve(&b, &r).unwrap();
        let mut rhs = nalgebra::DVector::zeros(n + p);
        for i in 0..n {
            rhs[i] = b[i];
        }
        for i in 0..p {
            rhs[n + i] = r[i];
        }
        let sol = full.lu().solve(&rhs).unwrap();
        for i in 0..n {
            assert!((x[i] - sol[i]).abs() < 1e-9, "x[{i}]");
        }
        for i in 0..p {
            assert!((w[i] - sol[n + i]).abs() < 1e-9, "w[{i}]");
        }
    }
}
