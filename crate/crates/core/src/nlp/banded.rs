//! Symmetric banded LDL^T factorization without pivoting.
//!
//! The interior-point KKT systems are symmetric quasi-definite once the
//! primal/dual regularization is applied, so an unpivoted factorization is
//! stable enough; the caller watches the pivot signs (inertia) and retries
//! with stronger regularization on failure.

/// Lower-band storage: `band[k][j]` holds entry `(j + k, j)` for
/// `k = 0..=bandwidth`.
pub struct BandedLdl {
    pub n: usize,
    pub bandwidth: usize,
    band: Vec<Vec<f64>>,
    /// Diagonal of D after factorization.
    d: Vec<f64>,
    factored: bool,
}

pub enum FactorOutcome {
    /// Factorization succeeded; `negative_pivots` counts sign changes.
    Ok { negative_pivots: usize },
    /// A pivot collapsed (zero or non-finite) at the given index.
    Breakdown { index: usize },
}

impl BandedLdl {
    pub fn new(n: usize, bandwidth: usize) -> Self {
        let bw = bandwidth.min(n.saturating_sub(1));
        BandedLdl {
            n,
            bandwidth: bw,
            band: (0..=bw).map(|k| vec![0.0; n - k]).collect(),
            d: vec![0.0; n],
            factored: false,
        }
    }

    pub fn clear(&mut self) {
        for row in self.band.iter_mut() {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        self.factored = false;
    }

    /// Accumulate into entry `(i, j)`; only the lower triangle within the
    /// band is stored, so callers pass any order and duplicates sum.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        debug_assert!(k <= self.bandwidth, "entry ({i},{j}) outside bandwidth");
        self.band[k][lo] += v;
    }

    /// In-place LDL^T factorization. `pivot_tol` is the absolute pivot floor.
    pub fn factor(&mut self, pivot_tol: f64) -> FactorOutcome {
        let n = self.n;
        let bw = self.bandwidth;
        let mut negative = 0;
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut djj = self.band[0][j];
            for k in lo..j {
                let l_jk = self.band[j - k][k];
                djj -= l_jk * l_jk * self.d[k];
            }
            if !djj.is_finite() || djj.abs() < pivot_tol {
                return FactorOutcome::Breakdown { index: j };
            }
            if djj < 0.0 {
                negative += 1;
            }
            self.d[j] = djj;
            self.band[0][j] = djj;
            let hi = (j + bw).min(n - 1);
            for i in j + 1..=hi {
                let mut v = self.band[i - j][j];
                let lo_i = i.saturating_sub(bw).max(lo);
                for k in lo_i..j {
                    // both L[i][k] and L[j][k] must be inside the band
                    v -= self.band[i - k][k] * self.band[j - k][k] * self.d[k];
                }
                self.band[i - j][j] = v / djj;
            }
        }
        self.factored = true;
        FactorOutcome::Ok {
            negative_pivots: negative,
        }
    }

    /// Solve `A x = b` in place after a successful factorization.
    pub fn solve(&self, b: &mut [f64]) {
        assert!(self.factored, "solve before factor");
        let n = self.n;
        let bw = self.bandwidth;
        // forward: L y = b
        for j in 0..n {
            let yj = b[j];
            if yj != 0.0 {
                let hi = (j + bw).min(n - 1);
                for i in j + 1..=hi {
                    b[i] -= self.band[i - j][j] * yj;
                }
            }
        }
        // diagonal
        for j in 0..n {
            b[j] /= self.d[j];
        }
        // backward: L^T x = y
        for j in (0..n).rev() {
            let lo = j.saturating_sub(bw);
            let mut v = b[j];
            let hi = (j + bw).min(n - 1);
            for i in j + 1..=hi {
                v -= self.band[i - j][j] * b[i];
            }
            b[j] = v;
            let _ = lo;
        }
    }
}
