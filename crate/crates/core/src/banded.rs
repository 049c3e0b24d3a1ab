//! Banded matrices with partial-pivot LU.
//!
//! Rows are stored as short windows of contiguous columns. During
//! elimination a target row is rebased so its window starts at the pivot
//! column (everything left of it is already zero), which keeps the fill
//! from pivoting inside a fixed-capacity window of kl + ku + 1 entries.

use crate::error::{Error, Result};

/// Fixed row capacity; enough for kl + ku + 1 with the operators in this
/// crate (kl = 2, ku = 3).
const ROW_CAP: usize = 12;

#[derive(Debug, Clone, Copy)]
struct Row {
    lo: usize,
    c: [f64; ROW_CAP],
}

impl Row {
    fn zero(lo: usize) -> Row {
        Row {
            lo,
            c: [0.0; ROW_CAP],
        }
    }

    #[inline]
    fn get(&self, col: usize) -> f64 {
        if col >= self.lo && col < self.lo + ROW_CAP {
            self.c[col - self.lo]
        } else {
            0.0
        }
    }

    #[inline]
    fn add(&mut self, col: usize, v: f64) {
        assert!(
            col >= self.lo && col < self.lo + ROW_CAP,
            "column {col} outside row window starting at {}",
            self.lo
        );
        self.c[col - self.lo] += v;
    }

    /// Shift the window start right to `new_lo`; entries left of the new
    /// start must already be zero (they were eliminated).
    fn rebase(&mut self, new_lo: usize) {
        if new_lo <= self.lo {
            return;
        }
        let shift = new_lo - self.lo;
        debug_assert!(self.c[..shift.min(ROW_CAP)].iter().all(|&v| v == 0.0));
        for k in 0..ROW_CAP {
            let src = k + shift;
            self.c[k] = if src < ROW_CAP { self.c[src] } else { 0.0 };
        }
        self.lo = new_lo;
    }
}

/// Square banded matrix, kl sub- and ku super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<Row>,
}

impl BandedMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> BandedMatrix {
        assert!(kl + ku + 1 <= ROW_CAP, "bandwidth exceeds row capacity");
        let rows = (0..n).map(|i| Row::zero(i.saturating_sub(kl))).collect();
        BandedMatrix { n, kl, ku, rows }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside band");
        self.rows[i].add(j, v);
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(j)
    }

    /// Largest absolute row sum (the infinity norm).
    pub fn norm_inf(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.c.iter().map(|c| c.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.rows
            .iter()
            .map(|row| {
                let mut s = 0.0;
                for (k, &c) in row.c.iter().enumerate() {
                    if c != 0.0 {
                        s += c * x[row.lo + k];
                    }
                }
                s
            })
            .collect()
    }

    /// rhs - A x with compensated products and Neumaier accumulation, so
    /// the result is accurate to roughly eps * |true residual| instead of
    /// eps * |A| * |x|. Used for iterative refinement.
    pub fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        assert_eq!(rhs.len(), self.n);
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut s = rhs[i];
                let mut comp = 0.0;
                for (k, &c) in row.c.iter().enumerate() {
                    if c != 0.0 {
                        let p = -c * x[row.lo + k];
                        let perr = (-c).mul_add(x[row.lo + k], -p);
                        let t = s + p;
                        comp += if s.abs() >= p.abs() {
                            (s - t) + p
                        } else {
                            (p - t) + s
                        };
                        comp += perr;
                        s = t;
                    }
                }
                s + comp
            })
            .collect()
    }

    /// Partial-pivot LU factorization.
    pub fn lu(&self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let mut rows = self.rows.clone();
        let mut pivots = vec![0usize; n];
        let mut mults = vec![0.0; n * kl];
        if self.norm_inf() == 0.0 {
            return Err(Error::Singular("zero matrix".into()));
        }
        for j in 0..n {
            let hi = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = rows[j].get(j).abs();
            for i in j + 1..=hi {
                let v = rows[i].get(j).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            // rows of the clamped operator differ in scale by 1/h^4, so the
            // pivot test must be absolute: only an exact breakdown counts
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(format!("pivot {best:.3e} at column {j}")));
            }
            pivots[j] = p;
            rows.swap(j, p);
            rows[j].rebase(j);
            let piv = rows[j].get(j);
            let pivot_row = rows[j];
            for (k, i) in (j + 1..=hi).enumerate() {
                rows[i].rebase(j);
                let m = rows[i].get(j) / piv;
                mults[j * kl + k] = m;
                if m != 0.0 {
                    for t in 0..ROW_CAP {
                        rows[i].c[t] -= m * pivot_row.c[t];
                    }
                }
                rows[i].c[0] = 0.0;
            }
        }
        Ok(BandedLu {
            n,
            kl,
            rows,
            pivots,
            mults,
        })
    }
}

/// Factored form returned by [`BandedMatrix::lu`].
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    rows: Vec<Row>,
    pivots: Vec<usize>,
    mults: Vec<f64>,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        let n = self.n;
        for j in 0..n {
            x.swap(j, self.pivots[j]);
            let hi = (j + self.kl).min(n - 1);
            for (k, i) in (j + 1..=hi).enumerate() {
                let m = self.mults[j * self.kl + k];
                if m != 0.0 {
                    x[i] -= m * x[j];
                }
            }
        }
        for i in (0..n).rev() {
            let row = &self.rows[i];
            let mut s = x[i];
            for k in 1..ROW_CAP {
                let col = row.lo + k;
                if col >= n {
                    break;
                }
                if row.c[k] != 0.0 {
                    s -= row.c[k] * x[col];
                }
            }
            x[i] = s / row.c[i - row.lo];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense Gaussian elimination oracle, only for small test systems.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut x = b.to_vec();
        for j in 0..n {
            let p = (j..n).max_by(|&r, &s| m[r][j].abs().total_cmp(&m[s][j].abs())).unwrap();
            m.swap(j, p);
            x.swap(j, p);
            for i in j + 1..n {
                let f = m[i][j] / m[j][j];
                for k in j..n {
                    m[i][k] -= f * m[j][k];
                }
                x[i] -= f * x[j];
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= m[i][k] * x[k];
            }
            x[i] = s / m[i][i];
        }
        x
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn banded_lu_matches_dense() {
        let n = 40;
        let (kl, ku) = (2, 3);
        let mut state = 42u64;
        let mut band = BandedMatrix::new(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = lcg(&mut state) * 4.0 + if i == j { 6.0 } else { 0.0 };
                band.add(i, j, v);
                dense[i][j] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| lcg(&mut state)).collect();
        let lu = band.lu().unwrap();
        let x = lu.solve(&b);
        let y = dense_solve(&dense, &b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1.0e-10, "{u} vs {v}");
        }
        // residual check through the compensated path
        let r = band.residual(&x, &b);
        let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(rmax < 1.0e-12, "residual {rmax}");
    }

    #[test]
    fn pivoting_handles_weak_diagonal() {
        // leading diagonal entry much smaller than its subdiagonal
        let n = 24;
        let mut band = BandedMatrix::new(n, 2, 3);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 3).min(n - 1) {
                let v = if i == j {
                    1.0e-13
                } else if j + 1 == i {
                    3.0
                } else {
                    1.0
                };
                band.add(i, j, v);
                dense[i][j] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = band.lu().unwrap().solve(&b);
        let y = dense_solve(&dense, &b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1.0e-8 * y.iter().fold(1.0f64, |m, t| m.max(t.abs())));
        }
    }

    #[test]
    fn singular_matrix_detected() {
        let n = 20;
        let mut band = BandedMatrix::new(n, 2, 3);
        for i in 0..n {
            // two equal rows -> singular
            let base = if i == 7 { 6 } else { i };
            for j in base.saturating_sub(1)..=(base + 1).min(n - 1) {
                if j + 2 >= i && j <= i + 3 {
                    band.add(i, j, if base == j { 2.0 } else { -1.0 });
                }
            }
        }
        assert!(matches!(band.lu(), Err(Error::Singular(_))));
    }
}
