//! Banded LU with partial pivoting (LAPACK-style band storage).
//!
//! Stores a matrix with kl sub- and ku super-diagonals in a (2*kl + ku + 1) x n
//! array; pivoting can push fill into kl extra super-diagonals, which the
//! layout reserves.

pub struct Banded {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    /// row-major band storage: ab[row][j] with row in 0..2kl+ku+1;
    /// entry (i, j) lives at ab[kl + ku + i - j][j]
    ab: Vec<f64>,
}

impl Banded {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded { n, kl, ku, ab: vec![0.0; width * n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) * self.n + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i + self.ku + self.kl || i > j + self.kl {
            0.0
        } else {
            self.ab[self.idx(i, j)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i + self.ku && i <= j + self.kl, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i + self.ku && i <= j + self.kl, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    /// Factor in place; returns the pivot rows. The effective upper bandwidth
    /// grows to kl + ku during elimination.
    pub fn lu(&mut self) -> Option<Vec<usize>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let kv = kl + ku;
        let mut piv = vec![0usize; n];
        for j in 0..n {
            // pivot search in column j, rows j..min(j+kl, n-1)
            let i_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.get(j, j).abs();
            for i in (j + 1)..=i_max {
                let v = self.ab[self.idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            piv[j] = p;
            if p != j {
                // swap rows j and p over columns j..=min(j+kv, n-1)
                let c_max = (j + kv).min(n - 1);
                for c in j..=c_max {
                    let a = self.idx(j, c);
                    let b = self.idx(p, c);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.idx(j, j)];
            for i in (j + 1)..=i_max {
                let k = self.idx(i, j);
                let m = self.ab[k] / pivot;
                self.ab[k] = m;
                if m != 0.0 {
                    let c_max = (j + kv).min(n - 1);
                    for c in (j + 1)..=c_max {
                        let a = self.idx(j, c);
                        let b = self.idx(i, c);
                        self.ab[b] -= m * self.ab[a];
                    }
                }
            }
        }
        Some(piv)
    }

    /// Solve after `lu`, overwriting rhs with the solution.
    pub fn solve(&self, piv: &[usize], rhs: &mut [f64]) {
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n {
            if piv[j] != j {
                rhs.swap(j, piv[j]);
            }
            let i_max = (j + self.kl).min(n - 1);
            for i in (j + 1)..=i_max {
                rhs[i] -= self.ab[self.idx(i, j)] * rhs[j];
            }
        }
        for j in (0..n).rev() {
            let c_max = (j + kv).min(n - 1);
            let mut acc = rhs[j];
            for c in (j + 1)..=c_max {
                acc -= self.ab[self.idx(j, c)] * rhs[c];
            }
            rhs[j] = acc / self.ab[self.idx(j, j)];
        }
    }

    /// y = A x for the unfactored matrix (used by tests).
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let j_lo = i.saturating_sub(self.kl);
            let j_hi = (i + self.ku).min(n - 1);
            let mut acc = 0.0;
            for j in j_lo..=j_hi {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_band_solve() {
        let n = 60;
        let (kl, ku) = (4, 4);
        let mut a = Banded::new(n, kl, ku);
        let mut s = 42u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                a.set(i, j, rnd());
            }
            a.add(i, i, 4.0);
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs = a.matvec(&x_true);
        let mut f = Banded::new(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                f.set(i, j, a.get(i, j));
            }
        }
        let piv = f.lu().unwrap();
        f.solve(&piv, &mut rhs);
        for (a, b) in rhs.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
