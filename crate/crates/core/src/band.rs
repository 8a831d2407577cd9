//! Banded matrices with partial-pivoting LU.
//!
//! Every linear solve in the crate (implicit time stages, Riesz solves for
//! dual norms) goes through this module. Matrices are assembled by probing a
//! matrix-free operator with strided unit vectors, so the factored matrix is
//! guaranteed to agree with the operator that produced it.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BandError {
    #[error("matrix is singular at column {col}")]
    Singular { col: usize },
    #[error("dimension mismatch: matrix is {n}, vector is {len}")]
    DimensionMismatch { n: usize, len: usize },
}

/// General banded matrix in LAPACK-style column storage.
///
/// `kl` subdiagonals and `ku` superdiagonals are stored, plus `kl` spare
/// rows for pivoting fill-in. Entry `(i, j)` lives at
/// `ab[j * ldab + kl + ku + i - j]`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku < j || j + self.kl < i {
            0.0
        } else {
            self.ab[self.offset(i, j)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(
            i + self.ku >= j && j + self.kl >= i,
            "entry ({i},{j}) outside band (kl={}, ku={})",
            self.kl,
            self.ku
        );
        let o = self.offset(i, j);
        self.ab[o] = v;
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                sums[i] += self.ab[self.offset(i, j)].abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            for i in lo..=hi {
                y[i] += self.ab[self.offset(i, j)] * xj;
            }
        }
    }

    /// LU factorization with partial pivoting (banded `getrf`).
    pub fn factor(mut self) -> Result<BandLu, BandError> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku; // rows of factored U band
        let mut ipiv = vec![0usize; n];
        let mut mults = vec![0.0f64; kl.max(1)];
        // `ju` is the index of the last column affected by row swaps so far.
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j, rows j..=j+km
            let mut p = 0usize;
            let mut pmax = self.ab[j * ldab + kv].abs();
            for t in 1..=km {
                let v = self.ab[j * ldab + kv + t].abs();
                if v > pmax {
                    pmax = v;
                    p = t;
                }
            }
            ipiv[j] = j + p;
            if pmax == 0.0 {
                return Err(BandError::Singular { col: j });
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                // swap rows j and j+p across columns j..=ju
                for c in j..=ju {
                    let oa = c * ldab + kv + j - c;
                    let ob = c * ldab + kv + j + p - c;
                    self.ab.swap(oa, ob);
                }
            }
            let piv = self.ab[j * ldab + kv];
            let jcol = j * ldab + kv;
            for t in 1..=km {
                self.ab[jcol + t] /= piv;
            }
            if km == 0 {
                continue;
            }
            mults[..km].copy_from_slice(&self.ab[jcol + 1..jcol + 1 + km]);
            // rank-1 update of the trailing band, column by column
            for c in (j + 1)..=ju {
                let base = c * ldab + kv + j - c;
                let ujc = self.ab[base];
                if ujc != 0.0 {
                    let col = &mut self.ab[base + 1..base + 1 + km];
                    for (x, m) in col.iter_mut().zip(&mults[..km]) {
                        *x -= m * ujc;
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            ab: self.ab,
            ipiv,
        })
    }
}

/// Factored form of a [`BandMatrix`]; solves by forward/back substitution.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), BandError> {
        if b.len() != self.n {
            return Err(BandError::DimensionMismatch {
                n: self.n,
                len: b.len(),
            });
        }
        let (n, kl, kv, ldab) = (self.n, self.kl, self.kl + self.ku, self.ldab);
        // L solve with row interchanges
        if kl > 0 {
            for j in 0..n.saturating_sub(1) {
                let p = self.ipiv[j];
                if p != j {
                    b.swap(j, p);
                }
                let bj = b[j];
                if bj != 0.0 {
                    let km = kl.min(n - 1 - j);
                    for t in 1..=km {
                        b[j + t] -= self.ab[j * ldab + kv + t] * bj;
                    }
                }
            }
        }
        // U solve; U has bandwidth kl+ku
        for j in (0..n).rev() {
            let bj = b[j] / self.ab[j * ldab + kv];
            b[j] = bj;
            if bj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= self.ab[j * ldab + kv + i - j] * bj;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, BandError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

/// Solve with iterative refinement against a matrix-free operator: the
/// factorization acts as (possibly stale) preconditioner, the residual is
/// always measured against `apply`. Solve quality is the normwise backward
/// error `|b - A z| / (|A| |z| + |b|)` with `matrix_norm` standing in for
/// `|A|` (pass `0.0` to fall back to a plain `|b|`-relative residual).
/// Returns the solution and its final backward error.
pub fn solve_refined<F>(
    lu: &BandLu,
    apply: F,
    b: &[f64],
    matrix_norm: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64), BandError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut z = lu.solve(b)?;
    let bnorm = l2(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; b.len()];
    let mut rel = f64::INFINITY;
    for _ in 0..max_iter {
        apply(&z, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let new_rel = l2(&r) / (matrix_norm * l2(&z) + bnorm);
        if new_rel <= tol {
            return Ok((z, new_rel));
        }
        if new_rel >= rel {
            return Ok((z, new_rel)); // stagnated at rounding level
        }
        rel = new_rel;
        let d = lu.solve(&r)?;
        for (zi, di) in z.iter_mut().zip(&d) {
            *zi += di;
        }
    }
    Ok((z, rel))
}

/// Assemble the band of a linear operator by probing with strided unit
/// vectors. Columns spaced more than `kl + ku` apart have disjoint row
/// support, so `kl + ku + 1` applications recover the whole matrix.
pub fn probe_band<F>(n: usize, kl: usize, ku: usize, mut apply: F) -> BandMatrix
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut a = BandMatrix::zeros(n, kl, ku);
    let stride = kl + ku + 1;
    let mut e = vec![0.0; n];
    let mut r = vec![0.0; n];
    for k in 0..stride.min(n) {
        e.fill(0.0);
        let mut j = k;
        while j < n {
            e[j] = 1.0;
            j += stride;
        }
        apply(&e, &mut r);
        let mut j = k;
        while j < n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                if r[i] != 0.0 {
                    a.set(i, j, r[i]);
                }
            }
            j += stride;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in (c + 1)..n {
                let m = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= m * a[c][k];
                }
                b[r] -= m * b[c];
            }
        }
        for c in (0..n).rev() {
            let mut s = b[c];
            for k in (c + 1)..n {
                s -= a[c][k] * b[k];
            }
            b[c] = s / a[c][c];
        }
        b
    }

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> (BandMatrix, Vec<Vec<f64>>) {
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i + ku >= j && j + kl >= i {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    let v = if i == j { v + 4.0 } else { v };
                    band.set(i, j, v);
                    dense[i][j] = v;
                }
            }
        }
        (band, dense)
    }

    #[test]
    fn band_lu_matches_dense_gauss() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 1), (12, 3, 2), (30, 5, 9), (40, 11, 4)] {
            let (band, dense) = random_band(n, kl, ku, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x_band = band.clone().factor().unwrap().solve(&b).unwrap();
            let x_dense = dense_solve(dense, b.clone());
            for i in 0..n {
                assert!(
                    (x_band[i] - x_dense[i]).abs() < 1e-11,
                    "n={n} kl={kl} ku={ku} i={i}: {} vs {}",
                    x_band[i],
                    x_dense[i]
                );
            }
        }
    }

    #[test]
    fn band_lu_needs_pivoting() {
        // zero leading diagonal entry forces a row interchange
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 0, 0.0);
        a.set(0, 1, 2.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(1, 2, 1.0);
        a.set(2, 1, 3.0);
        a.set(2, 2, 1.0);
        let lu = a.factor().unwrap();
        // A x = b with x = [1, 2, -1]
        let b = vec![4.0, 2.0, 5.0];
        let x = lu.solve(&b).unwrap();
        for (xi, want) in x.iter().zip([1.0, 2.0, -1.0]) {
            assert!((xi - want).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.set(0, 0, 1.0);
        a.set(0, 1, 2.0);
        a.set(1, 0, 0.5);
        a.set(1, 1, 1.0);
        assert!(matches!(a.factor(), Err(BandError::Singular { .. })));
    }

    #[test]
    fn probe_recovers_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (band, _) = random_band(25, 4, 6, &mut rng);
        let probed = probe_band(25, 4, 6, |x, y| band.matvec(x, y));
        let x: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y0 = vec![0.0; 25];
        let mut y1 = vec![0.0; 25];
        band.matvec(&x, &mut y0);
        probed.matvec(&x, &mut y1);
        for i in 0..25 {
            assert_eq!(y0[i], y1[i]);
        }
    }
}
