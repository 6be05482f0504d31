//! Square banded linear systems solved by Gaussian elimination with partial pivoting.

use alloc::vec::Vec;

/// Row-major band storage. Position `i` keeps columns `i - kl ..= i + kl + ku`;
/// the extra `kl` columns on the right hold fill-in created by row swaps.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PivotStats {
    pub min_abs: f64,
    pub max_abs: f64,
}

impl PivotStats {
    /// Ratio of extreme pivot magnitudes, a cheap stand-in for the condition number.
    pub fn ratio(&self) -> f64 {
        if self.min_abs == 0.0 {
            f64::INFINITY
        } else {
            self.max_abs / self.min_abs
        }
    }
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: alloc::vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.kl + self.ku {
            return None;
        }
        Some(i * self.width + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`. Panics if `(i, j)` lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j).expect("index in range");
        self.data[s] += v;
    }

    /// Solves `A x = b` in place, consuming the matrix.
    /// Returns `Err(stats)` if a zero pivot is met.
    pub fn solve(mut self, mut b: Vec<f64>) -> Result<(Vec<f64>, PivotStats), PivotStats> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let reach = self.kl + self.ku;
        let mut stats = PivotStats { min_abs: f64::INFINITY, max_abs: 0.0 };
        for j in 0..n {
            let last_row = (j + self.kl).min(n - 1);
            let mut p = j;
            let mut best = self.get(j, j).abs();
            for i in j + 1..=last_row {
                let v = self.get(i, j).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            stats.min_abs = stats.min_abs.min(best);
            stats.max_abs = stats.max_abs.max(best);
            if best == 0.0 {
                return Err(stats);
            }
            let last_col = (j + reach).min(n - 1);
            if p != j {
                for c in j..=last_col {
                    let a = self.get(j, c);
                    let bb = self.get(p, c);
                    self.set_unchecked(j, c, bb);
                    self.set_unchecked(p, c, a);
                }
                b.swap(j, p);
            }
            let pivot = self.get(j, j);
            for i in j + 1..=last_row {
                let m = self.get(i, j) / pivot;
                if m == 0.0 {
                    continue;
                }
                self.set_unchecked(i, j, 0.0);
                for c in j + 1..=last_col {
                    let v = self.get(j, c);
                    if v != 0.0 {
                        let s = self.slot(i, c).expect("fill stays inside storage");
                        self.data[s] -= m * v;
                    }
                }
                b[i] -= m * b[j];
            }
        }
        for j in (0..n).rev() {
            let last_col = (j + reach).min(n - 1);
            let mut acc = b[j];
            for c in j + 1..=last_col {
                acc -= self.get(j, c) * b[c];
            }
            b[j] = acc / self.get(j, j);
        }
        Ok((b, stats))
    }

    fn set_unchecked(&mut self, i: usize, j: usize, v: f64) {
        match self.slot(i, j) {
            Some(s) => self.data[s] = v,
            None => debug_assert!(v == 0.0, "dropping non-zero {v} at ({i}, {j})"),
        }
    }
}
