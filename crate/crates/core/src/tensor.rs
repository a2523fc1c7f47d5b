use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Plain 2-vector.
pub type Vec2 = [f64; 2];

/// Second-order tensor in two dimensions, stored by components.
///
/// Serialised as a row-major nested array `[[xx, xy], [yx, yy]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yx: f64,
    pub yy: f64,
}

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2 { xx: 0.0, xy: 0.0, yx: 0.0, yy: 0.0 };
    pub const IDENTITY: Tensor2 = Tensor2 { xx: 1.0, xy: 0.0, yx: 0.0, yy: 1.0 };

    pub const fn new(xx: f64, xy: f64, yx: f64, yy: f64) -> Self {
        Tensor2 { xx, xy, yx, yy }
    }

    pub const fn symmetric(xx: f64, xy: f64, yy: f64) -> Self {
        Tensor2 { xx, xy, yx: xy, yy }
    }

    pub fn isotropic(value: f64) -> Self {
        Tensor2::symmetric(value, 0.0, value)
    }

    /// Outer product `u ⊗ v`.
    pub fn outer(u: Vec2, v: Vec2) -> Self {
        Tensor2::new(u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1])
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Tensor2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.yx, self.yy]]
    }

    pub fn from_columns(c0: Vec2, c1: Vec2) -> Self {
        Tensor2::new(c0[0], c1[0], c0[1], c1[1])
    }

    /// Component `(i, j)`, zero-based.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows()[i][j]
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn transpose(&self) -> Self {
        Tensor2::new(self.xx, self.yx, self.xy, self.yy)
    }

    pub fn sym(&self) -> Self {
        let off = 0.5 * (self.xy + self.yx);
        Tensor2::symmetric(self.xx, off, self.yy)
    }

    /// `|xy - yx|`.
    pub fn asymmetry(&self) -> f64 {
        (self.xy - self.yx).abs()
    }

    pub fn dot(&self, v: Vec2) -> Vec2 {
        [self.xx * v[0] + self.xy * v[1], self.yx * v[0] + self.yy * v[1]]
    }

    pub fn max_abs(&self) -> f64 {
        self.xx.abs().max(self.xy.abs()).max(self.yx.abs()).max(self.yy.abs())
    }

    /// Eigenvalues of the symmetric part, in increasing order.
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let s = self.sym();
        let mean = 0.5 * (s.xx + s.yy);
        let half_diff = 0.5 * (s.xx - s.yy);
        let radius = half_diff.hypot(s.xy);
        [mean - radius, mean + radius]
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yx.is_finite() && self.yy.is_finite()
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, o: Tensor2) -> Tensor2 {
        Tensor2::new(self.xx + o.xx, self.xy + o.xy, self.yx + o.yx, self.yy + o.yy)
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, o: Tensor2) {
        *self = *self + o;
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, o: Tensor2) -> Tensor2 {
        Tensor2::new(self.xx - o.xx, self.xy - o.xy, self.yx - o.yx, self.yy - o.yy)
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        Tensor2::new(-self.xx, -self.xy, -self.yx, -self.yy)
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, s: f64) -> Tensor2 {
        Tensor2::new(self.xx * s, self.xy * s, self.yx * s, self.yy * s)
    }
}

impl Mul<Tensor2> for f64 {
    type Output = Tensor2;
    fn mul(self, t: Tensor2) -> Tensor2 {
        t * self
    }
}

impl fmt::Display for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.xx, self.xy, self.yx, self.yy)
    }
}

impl Serialize for Tensor2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tensor2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        <[[f64; 2]; 2]>::deserialize(deserializer).map(Tensor2::from_rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let t = Tensor2::symmetric(3.0, 0.0, -1.0);
        assert_eq!(t.sym_eigenvalues(), [-1.0, 3.0]);
    }

    #[test]
    fn json_layout_is_row_major() {
        let t = Tensor2::new(1.0, 2.0, 3.0, 4.0);
        let text = serde_json::to_string(&t).unwrap();
        assert_eq!(text, "[[1.0,2.0],[3.0,4.0]]");
        let back: Tensor2 = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
    }
}
