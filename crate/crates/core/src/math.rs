//! Scalar abstraction and forward-mode differentiation.
//!
//! All dynamics kernels are written once, generically over [`Scalar`], and
//! evaluated either with plain `f64` or with [`Ad`] to obtain exact first
//! derivatives with respect to a small set of seeded inputs.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number of derivative lanes carried by [`Ad`].
///
/// Constraint blocks in the transcription touch at most ~28 local variables,
/// so 32 lanes cover every caller with headroom.
pub const AD_LANES: usize = 32;

/// Minimal scalar interface needed by the dynamics and transcription kernels.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// Forward-mode dual number with a fixed number of derivative lanes.
#[derive(Clone, Copy, Debug)]
pub struct Ad {
    pub v: f64,
    pub d: [f64; AD_LANES],
}

impl Ad {
    #[inline]
    pub fn constant(v: f64) -> Self {
        Ad {
            v,
            d: [0.0; AD_LANES],
        }
    }

    /// A seeded variable: unit derivative in lane `lane`.
    #[inline]
    pub fn variable(v: f64, lane: usize) -> Self {
        let mut d = [0.0; AD_LANES];
        d[lane] = 1.0;
        Ad { v, d }
    }

    /// Chain rule helper: value `v`, inner derivative scaled by `dv`.
    #[inline]
    fn lift(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= dv;
        }
        Ad { v, d }
    }
}

impl Add for Ad {
    type Output = Ad;
    #[inline]
    fn add(self, rhs: Ad) -> Ad {
        let mut d = self.d;
        for (x, y) in d.iter_mut().zip(rhs.d.iter()) {
            *x += y;
        }
        Ad {
            v: self.v + rhs.v,
            d,
        }
    }
}

impl Sub for Ad {
    type Output = Ad;
    #[inline]
    fn sub(self, rhs: Ad) -> Ad {
        let mut d = self.d;
        for (x, y) in d.iter_mut().zip(rhs.d.iter()) {
            *x -= y;
        }
        Ad {
            v: self.v - rhs.v,
            d,
        }
    }
}

impl Mul for Ad {
    type Output = Ad;
    #[inline]
    fn mul(self, rhs: Ad) -> Ad {
        let mut d = [0.0; AD_LANES];
        for i in 0..AD_LANES {
            d[i] = self.d[i] * rhs.v + rhs.d[i] * self.v;
        }
        Ad {
            v: self.v * rhs.v,
            d,
        }
    }
}

impl Div for Ad {
    type Output = Ad;
    #[inline]
    fn div(self, rhs: Ad) -> Ad {
        let inv = 1.0 / rhs.v;
        let mut d = [0.0; AD_LANES];
        for i in 0..AD_LANES {
            d[i] = (self.d[i] - self.v * inv * rhs.d[i]) * inv;
        }
        Ad {
            v: self.v * inv,
            d,
        }
    }
}

impl Neg for Ad {
    type Output = Ad;
    #[inline]
    fn neg(self) -> Ad {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x = -*x;
        }
        Ad { v: -self.v, d }
    }
}

impl Scalar for Ad {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Ad::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    #[inline]
    fn sin(self) -> Self {
        self.lift(self.v.sin(), self.v.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.lift(self.v.cos(), -self.v.sin())
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.lift(s, 0.5 / s)
    }
}

/// Planar 2-vector over a generic scalar.
#[derive(Clone, Copy, Debug)]
pub struct V2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> V2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        V2 { x, y }
    }
    #[inline]
    pub fn zero() -> Self {
        V2 {
            x: T::zero(),
            y: T::zero(),
        }
    }
    #[inline]
    pub fn scale(self, s: T) -> Self {
        V2 {
            x: self.x * s,
            y: self.y * s,
        }
    }
    /// Planar cross product `self.x * rhs.y - self.y * rhs.x` (z component,
    /// counter-clockwise positive).
    #[inline]
    pub fn cross(self, rhs: V2<T>) -> T {
        self.x * rhs.y - self.y * rhs.x
    }
    #[inline]
    pub fn dot(self, rhs: V2<T>) -> T {
        self.x * rhs.x + self.y * rhs.y
    }
}

impl<T: Scalar> Add for V2<T> {
    type Output = V2<T>;
    #[inline]
    fn add(self, rhs: V2<T>) -> V2<T> {
        V2 {
            x: self.x + rhs.x,
            y: self.y + rhs.y,
        }
    }
}

impl<T: Scalar> Sub for V2<T> {
    type Output = V2<T>;
    #[inline]
    fn sub(self, rhs: V2<T>) -> V2<T> {
        V2 {
            x: self.x - rhs.x,
            y: self.y - rhs.y,
        }
    }
}

/// Unit vector of a link tilted by angle `phi` from the vertical,
/// counter-clockwise positive: `(-sin phi, cos phi)`.
#[inline]
pub fn link_dir<T: Scalar>(phi: T) -> V2<T> {
    V2::new(-phi.sin(), phi.cos())
}

/// Derivative of [`link_dir`] with respect to `phi`: `(-cos phi, -sin phi)`.
#[inline]
pub fn link_dir_d<T: Scalar>(phi: T) -> V2<T> {
    V2::new(-phi.cos(), -phi.sin())
}

/// Sole direction of the foot link (heel-to-toe, +x when flat): `(cos phi, sin phi)`.
#[inline]
pub fn sole_dir<T: Scalar>(phi: T) -> V2<T> {
    V2::new(phi.cos(), phi.sin())
}

/// Solve the symmetric positive-definite 3x3 system `A x = b` by Cholesky.
///
/// Generic so the transcription can differentiate through the solve.
pub fn solve_spd3<T: Scalar>(a: &[[T; 3]; 3], b: &[T; 3]) -> [T; 3] {
    // L lower-triangular with A = L L^T.
    let l00 = a[0][0].sqrt();
    let l10 = a[1][0] / l00;
    let l20 = a[2][0] / l00;
    let l11 = (a[1][1] - l10 * l10).sqrt();
    let l21 = (a[2][1] - l20 * l10) / l11;
    let l22 = (a[2][2] - l20 * l20 - l21 * l21).sqrt();
    // Forward substitution L y = b.
    let y0 = b[0] / l00;
    let y1 = (b[1] - l10 * y0) / l11;
    let y2 = (b[2] - l20 * y0 - l21 * y1) / l22;
    // Back substitution L^T x = y.
    let x2 = y2 / l22;
    let x1 = (y1 - l21 * x2) / l11;
    let x0 = (y0 - l10 * x1 - l20 * x2) / l00;
    [x0, x1, x2]
}

/// Solve a general 3x3 system by Gaussian elimination with partial pivoting
/// (f64 only; used for Jacobian-transpose wrench maps).
pub fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = m[i][3];
        for k in i + 1..3 {
            s -= m[i][k] * x[k];
        }
        x[i] = s / m[i][i];
    }
    Some(x)
}

/// Determinant of a 3x3 matrix.
pub fn det3(a: &[[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-7;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn dual_arithmetic_matches_finite_differences() {
        let x0 = 0.7;
        let cases: Vec<(fn(Ad) -> Ad, fn(f64) -> f64)> = vec![
            (|x| x * x + x, |x| x * x + x),
            (|x| x.sin() * x.cos(), |x| x.sin() * x.cos()),
            (
                |x| (x + Ad::constant(2.0)).sqrt() / x,
                |x| (x + 2.0_f64).sqrt() / x,
            ),
            (|x| -(x * x * x), |x| -(x * x * x)),
        ];
        for (fa, ff) in cases {
            let y = fa(Ad::variable(x0, 3));
            assert!((y.v - ff(x0)).abs() < 1e-12);
            assert!((y.d[3] - fd(ff, x0)).abs() < 1e-6);
            assert_eq!(y.d[0], 0.0);
        }
    }

    #[test]
    fn dual_division_quotient_rule() {
        let x = Ad::variable(1.3, 0);
        let y = Ad::variable(-0.4, 1);
        let q = x / y;
        assert!((q.v - (1.3 / -0.4)).abs() < 1e-14);
        assert!((q.d[0] - 1.0 / -0.4).abs() < 1e-12);
        assert!((q.d[1] - (-1.3 / 0.16)).abs() < 1e-10);
    }

    #[test]
    fn spd3_solve_recovers_solution() {
        let a = [[4.0, 1.0, 0.2], [1.0, 3.0, 0.5], [0.2, 0.5, 2.0]];
        let x_true = [1.0, -2.0, 0.5];
        let mut b = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i] += a[i][j] * x_true[j];
            }
        }
        let x = solve_spd3(&a, &b);
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn solve3_detects_singular() {
        let a = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]];
        assert!(solve3(&a, &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn det3_matches_cofactor_expansion() {
        let a = [[2.0, 1.0, 0.5], [-1.0, 3.0, 0.0], [0.3, 0.2, 1.5]];
        // cofactor expansion by hand
        let expected = 2.0 * (3.0 * 1.5 - 0.0 * 0.2) - 1.0 * (-1.0 * 1.5 - 0.0 * 0.3)
            + 0.5 * (-1.0 * 0.2 - 3.0 * 0.3);
        assert!((det3(&a) - expected).abs() < 1e-14);
    }
}
