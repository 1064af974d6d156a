//! Basic 3-component vector math and the orientation / in-sphere predicates
//! used by triangulation and containment.
//!
//! Predicates are evaluated in `f64` with a conservative error bound; when the
//! result falls within the bound the determinant is recomputed in exact
//! rational arithmetic, so near-cocircular and near-cospherical configurations
//! never flip sign.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

impl Vec3 {
    pub const ZERO: Vec3 = vec3(0.0, 0.0, 0.0);

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn dist_sq(self, o: Vec3) -> f64 {
        (self - o).norm_sq()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero input.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n <= f64::MIN_POSITIVE.sqrt() {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn min_by_component(self, o: Vec3) -> Vec3 {
        vec3(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max_by_component(self, o: Vec3) -> Vec3 {
        vec3(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        vec3(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        vec3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        vec3(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        vec3(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        vec3(-self.x, -self.y, -self.z)
    }
}

/// Closest point to `p` on segment `[a, b]`.
pub fn closest_point_on_segment(p: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

/// Closest point to `p` on triangle `(a, b, c)`, clamped to the triangle.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    // Ericson-style region classification via barycentric checks.
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return a + ab * t;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return a + ac * t;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * t;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Closest points between segments `[p1,q1]` and `[p2,q2]`, returned as a pair.
pub fn closest_points_between_segments(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> (Vec3, Vec3) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_sq();
    let e = d2.norm_sq();
    let f = d2.dot(r);
    let (s, t);
    if a == 0.0 && e == 0.0 {
        return (p1, p2);
    }
    if a == 0.0 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e == 0.0 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s_ = if denom != 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t_ = (b * s_ + f) / e;
            if t_ < 0.0 {
                t_ = 0.0;
                s_ = (-c / a).clamp(0.0, 1.0);
            } else if t_ > 1.0 {
                t_ = 1.0;
                s_ = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s_;
            t = t_;
        }
    }
    (p1 + d1 * s, p2 + d2 * t)
}

fn big(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite coordinate")
}

fn sign_of(r: &BigRational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

fn det3_exact(m: &[[BigRational; 3]; 3]) -> BigRational {
    let a = &m[0];
    let b = &m[1];
    let c = &m[2];
    &a[0] * (&b[1] * &c[2] - &b[2] * &c[1]) - &a[1] * (&b[0] * &c[2] - &b[2] * &c[0])
        + &a[2] * (&b[0] * &c[1] - &b[1] * &c[0])
}

fn det4_exact(m: &[[BigRational; 4]; 4]) -> BigRational {
    let mut acc = BigRational::from_integer(BigInt::from(0));
    for col in 0..4 {
        let mut minor: Vec<[BigRational; 3]> = Vec::with_capacity(3);
        for row in 1..4 {
            let mut mr: Vec<BigRational> = Vec::with_capacity(3);
            for c in 0..4 {
                if c != col {
                    mr.push(m[row][c].clone());
                }
            }
            minor.push([mr[0].clone(), mr[1].clone(), mr[2].clone()]);
        }
        let minor: [[BigRational; 3]; 3] = [minor[0].clone(), minor[1].clone(), minor[2].clone()];
        let term = &m[0][col] * det3_exact(&minor);
        if col % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

// Relative error bound factors. Deliberately loose: a spurious exact-path
// evaluation costs time, never correctness.
const EPS_ORIENT2D: f64 = 1e-12;
const EPS_ORIENT3D: f64 = 1e-11;
const EPS_INCIRCLE: f64 = 1e-11;
const EPS_INSPHERE: f64 = 1e-10;

/// Sign of the signed area of triangle `(a, b, c)` in the xy-plane:
/// +1 counterclockwise, -1 clockwise, 0 degenerate.
pub fn orient2d(a: Vec3, b: Vec3, c: Vec3) -> i32 {
    let acx = a.x - c.x;
    let acy = a.y - c.y;
    let bcx = b.x - c.x;
    let bcy = b.y - c.y;
    let det = acx * bcy - acy * bcx;
    let perm = acx.abs() * bcy.abs() + acy.abs() * bcx.abs();
    if det.abs() > EPS_ORIENT2D * perm {
        return det.signum() as i32;
    }
    let det = &(big(a.x) - big(c.x)) * &(big(b.y) - big(c.y))
        - &(big(a.y) - big(c.y)) * &(big(b.x) - big(c.x));
    sign_of(&det)
}

/// Sign of the signed volume of tetrahedron `(a, b, c, d)`:
/// +1 when `d` is on the positive side of the oriented plane `(a, b, c)`.
pub fn orient3d(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> i32 {
    let ab = b - a;
    let ac = c - a;
    let ad = d - a;
    let det = ad.dot(ab.cross(ac));
    let perm = ab.norm() * ac.norm() * ad.norm();
    if det.abs() > EPS_ORIENT3D * perm {
        return det.signum() as i32;
    }
    let row = |p: Vec3| {
        [
            big(p.x) - big(a.x),
            big(p.y) - big(a.y),
            big(p.z) - big(a.z),
        ]
    };
    // det(b-a, c-a, d-a) = (d-a) . ((b-a) x (c-a)) by cyclic invariance.
    let m = [row(b), row(c), row(d)];
    sign_of(&det3_exact(&m))
}

/// In-circle test in the xy-plane for the counterclockwise triangle `(a, b, c)`:
/// +1 when `p` is strictly inside the circumcircle, -1 strictly outside, 0 on it.
pub fn incircle(a: Vec3, b: Vec3, c: Vec3, p: Vec3) -> i32 {
    let adx = a.x - p.x;
    let ady = a.y - p.y;
    let bdx = b.x - p.x;
    let bdy = b.y - p.y;
    let cdx = c.x - p.x;
    let cdy = c.y - p.y;
    let ad2 = adx * adx + ady * ady;
    let bd2 = bdx * bdx + bdy * bdy;
    let cd2 = cdx * cdx + cdy * cdy;
    let det = adx * (bdy * cd2 - bd2 * cdy) - ady * (bdx * cd2 - bd2 * cdx)
        + ad2 * (bdx * cdy - bdy * cdx);
    let perm = adx.abs() * (bdy.abs() * cd2 + bd2 * cdy.abs())
        + ady.abs() * (bdx.abs() * cd2 + bd2 * cdx.abs())
        + ad2 * (bdx.abs() * cdy.abs() + bdy.abs() * cdx.abs());
    if det.abs() > EPS_INCIRCLE * perm {
        return det.signum() as i32;
    }
    let row = |q: Vec3| {
        let dx = big(q.x) - big(p.x);
        let dy = big(q.y) - big(p.y);
        let d2 = &dx * &dx + &dy * &dy;
        [dx, dy, d2]
    };
    let m = [row(a), row(b), row(c)];
    sign_of(&det3_exact(&m))
}

/// In-sphere test for the positively oriented tetrahedron `(a, b, c, d)`:
/// +1 when `p` is strictly inside the circumsphere, -1 strictly outside, 0 on it.
pub fn insphere(a: Vec3, b: Vec3, c: Vec3, d: Vec3, p: Vec3) -> i32 {
    let rows = [a - p, b - p, c - p, d - p];
    let mut m = [[0.0f64; 4]; 4];
    for (i, r) in rows.iter().enumerate() {
        m[i] = [r.x, r.y, r.z, r.norm_sq()];
    }
    let det = det4_f64(&m);
    let mut mabs = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            mabs[i][j] = m[i][j].abs();
        }
    }
    let perm = det4_permanent(&mabs);
    // The raw determinant is positive for an *outside* point when (a, b, c, d)
    // is positively oriented; negate to match the documented convention.
    if det.abs() > EPS_INSPHERE * perm {
        return -det.signum() as i32;
    }
    let row = |q: Vec3| {
        let dx = big(q.x) - big(p.x);
        let dy = big(q.y) - big(p.y);
        let dz = big(q.z) - big(p.z);
        let d2 = &dx * &dx + &dy * &dy + &dz * &dz;
        [dx, dy, dz, d2]
    };
    let m = [row(a), row(b), row(c), row(d)];
    -sign_of(&det4_exact(&m))
}

fn det3_f64(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn det4_f64(m: &[[f64; 4]; 4]) -> f64 {
    let mut acc = 0.0;
    for col in 0..4 {
        let mut minor = [[0.0f64; 3]; 3];
        for row in 1..4 {
            let mut k = 0;
            for c in 0..4 {
                if c != col {
                    minor[row - 1][k] = m[row][c];
                    k += 1;
                }
            }
        }
        let term = m[0][col] * det3_f64(&minor);
        acc += if col % 2 == 0 { term } else { -term };
    }
    acc
}

fn det4_permanent(m: &[[f64; 4]; 4]) -> f64 {
    let mut acc = 0.0;
    for col in 0..4 {
        let mut minor = [[0.0f64; 3]; 3];
        for row in 1..4 {
            let mut k = 0;
            for c in 0..4 {
                if c != col {
                    minor[row - 1][k] = m[row][c];
                    k += 1;
                }
            }
        }
        let p3 = minor[0][0] * (minor[1][1] * minor[2][2] + minor[1][2] * minor[2][1])
            + minor[0][1] * (minor[1][0] * minor[2][2] + minor[1][2] * minor[2][0])
            + minor[0][2] * (minor[1][0] * minor[2][1] + minor[1][1] * minor[2][0]);
        acc += m[0][col] * p3;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orient2d_signs() {
        let a = vec3(0.0, 0.0, 0.0);
        let b = vec3(1.0, 0.0, 0.0);
        let c = vec3(0.0, 1.0, 0.0);
        assert_eq!(orient2d(a, b, c), 1);
        assert_eq!(orient2d(a, c, b), -1);
        assert_eq!(orient2d(a, b, vec3(2.0, 0.0, 0.0)), 0);
    }

    #[test]
    fn orient3d_signs() {
        let a = vec3(0.0, 0.0, 0.0);
        let b = vec3(1.0, 0.0, 0.0);
        let c = vec3(0.0, 1.0, 0.0);
        let d = vec3(0.0, 0.0, 1.0);
        assert_eq!(orient3d(a, b, c, d), 1);
        assert_eq!(orient3d(a, c, b, d), -1);
        assert_eq!(orient3d(a, b, c, vec3(0.5, 0.5, 0.0)), 0);
    }

    #[test]
    fn incircle_near_tie_is_exact() {
        let a = vec3(0.0, 0.0, 0.0);
        let b = vec3(1.0, 0.0, 0.0);
        let c = vec3(1.0, 1.0, 0.0);
        // Fourth corner of the unit square is exactly on the circumcircle.
        assert_eq!(incircle(a, b, c, vec3(0.0, 1.0, 0.0)), 0);
        assert_eq!(incircle(a, b, c, vec3(1e-14, 1.0 - 1e-14, 0.0)), 1);
        assert_eq!(incircle(a, b, c, vec3(-1e-14, 1.0, 0.0)), -1);
    }

    #[test]
    fn insphere_near_tie_is_exact() {
        let a = vec3(0.0, 0.0, 0.0);
        let b = vec3(1.0, 0.0, 0.0);
        let c = vec3(0.0, 1.0, 0.0);
        let d = vec3(0.0, 0.0, 1.0);
        // Opposite cube corner of this circumsphere: (1,1,1) lies on it.
        assert_eq!(insphere(a, b, c, d, vec3(1.0, 1.0, 1.0)), 0);
        assert_eq!(insphere(a, b, c, d, vec3(0.5, 0.5, 0.5)), 1);
        assert_eq!(insphere(a, b, c, d, vec3(1.0 + 1e-13, 1.0, 1.0)), -1);
    }

    #[test]
    fn segment_and_triangle_closest_points() {
        let p = closest_point_on_segment(vec3(0.5, 2.0, 0.0), vec3(0.0, 0.0, 0.0), vec3(1.0, 0.0, 0.0));
        assert!(p.dist(vec3(0.5, 0.0, 0.0)) < 1e-15);
        let q = closest_point_on_triangle(
            vec3(0.2, 0.2, 5.0),
            vec3(0.0, 0.0, 0.0),
            vec3(1.0, 0.0, 0.0),
            vec3(0.0, 1.0, 0.0),
        );
        assert!(q.dist(vec3(0.2, 0.2, 0.0)) < 1e-15);
        let r = closest_point_on_triangle(
            vec3(-1.0, -1.0, 1.0),
            vec3(0.0, 0.0, 0.0),
            vec3(1.0, 0.0, 0.0),
            vec3(0.0, 1.0, 0.0),
        );
        assert!(r.dist(vec3(0.0, 0.0, 0.0)) < 1e-15);
    }

    #[test]
    fn segment_segment_distance() {
        let (p, q) = closest_points_between_segments(
            vec3(0.0, 0.0, 0.0),
            vec3(1.0, 0.0, 0.0),
            vec3(0.0, 1.0, 1.0),
            vec3(1.0, -1.0, 1.0),
        );
        assert!((p.dist(q) - 1.0).abs() < 1e-12);
    }
}
