//! Orientation and in-circle predicates with a floating-point filter and an
//! exact big-integer fallback.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::Point2D;

const EPS: f64 = f64::EPSILON * 0.5;
const CCW_ERRBOUND: f64 = (3.0 + 16.0 * EPS) * EPS;
const ICC_ERRBOUND: f64 = (10.0 + 96.0 * EPS) * EPS;

/// Sign of twice the signed area of (a, b, c): positive when counterclockwise.
pub fn orient2d(a: Point2D, b: Point2D, c: Point2D) -> Ordering {
    let detleft = (a.x - c.x) * (b.y - c.y);
    let detright = (a.y - c.y) * (b.x - c.x);
    let det = detleft - detright;
    let errbound = CCW_ERRBOUND * (detleft.abs() + detright.abs());
    if det > errbound {
        Ordering::Greater
    } else if -det > errbound {
        Ordering::Less
    } else {
        orient2d_exact(a, b, c)
    }
}

/// Positive when `d` lies strictly inside the circle through the
/// counterclockwise triangle (a, b, c).
pub fn incircle(a: Point2D, b: Point2D, c: Point2D, d: Point2D) -> Ordering {
    let adx = a.x - d.x;
    let bdx = b.x - d.x;
    let cdx = c.x - d.x;
    let ady = a.y - d.y;
    let bdy = b.y - d.y;
    let cdy = c.y - d.y;

    let bdxcdy = bdx * cdy;
    let cdxbdy = cdx * bdy;
    let alift = adx * adx + ady * ady;
    let cdxady = cdx * ady;
    let adxcdy = adx * cdy;
    let blift = bdx * bdx + bdy * bdy;
    let adxbdy = adx * bdy;
    let bdxady = bdx * ady;
    let clift = cdx * cdx + cdy * cdy;

    let det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    let permanent = (bdxcdy.abs() + cdxbdy.abs()) * alift
        + (cdxady.abs() + adxcdy.abs()) * blift
        + (adxbdy.abs() + bdxady.abs()) * clift;
    let errbound = ICC_ERRBOUND * permanent;
    if det > errbound {
        Ordering::Greater
    } else if -det > errbound {
        Ordering::Less
    } else {
        incircle_exact(a, b, c, d)
    }
}

/// Floating-point in-circle determinant, used for tolerance margins in tests
/// and diagnostics. Positive inside.
pub fn incircle_value(a: Point2D, b: Point2D, c: Point2D, d: Point2D) -> f64 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
}

fn sign(v: &BigInt) -> Ordering {
    if v.is_zero() {
        Ordering::Equal
    } else if v.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// Scales every coordinate to an integer sharing one power-of-two exponent.
/// Any finite double is `m * 2^e` with integer `m`, so the products below are
/// exact.
fn to_integers(coords: &[f64]) -> Vec<BigInt> {
    let decoded: Vec<(i64, i32)> = coords.iter().map(|&v| decode(v)).collect();
    let min_exp = decoded
        .iter()
        .filter(|(m, _)| *m != 0)
        .map(|&(_, e)| e)
        .min()
        .unwrap_or(0);
    decoded
        .into_iter()
        .map(|(m, e)| {
            if m == 0 {
                BigInt::zero()
            } else {
                BigInt::from(m) << ((e - min_exp) as usize)
            }
        })
        .collect()
}

fn decode(v: f64) -> (i64, i32) {
    if v == 0.0 {
        return (0, 0);
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 0 { 1i64 } else { -1i64 };
    let exponent = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = if exponent == 0 {
        (bits & 0xf_ffff_ffff_ffff) << 1
    } else {
        (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
    };
    (sign * mantissa as i64, exponent - 1075)
}

fn orient2d_exact(a: Point2D, b: Point2D, c: Point2D) -> Ordering {
    let v = to_integers(&[a.x, a.y, b.x, b.y, c.x, c.y]);
    let (ax, ay, bx, by, cx, cy) = (&v[0], &v[1], &v[2], &v[3], &v[4], &v[5]);
    let det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    sign(&det)
}

fn incircle_exact(a: Point2D, b: Point2D, c: Point2D, d: Point2D) -> Ordering {
    let v = to_integers(&[a.x, a.y, b.x, b.y, c.x, c.y, d.x, d.y]);
    let adx = &v[0] - &v[6];
    let ady = &v[1] - &v[7];
    let bdx = &v[2] - &v[6];
    let bdy = &v[3] - &v[7];
    let cdx = &v[4] - &v[6];
    let cdy = &v[5] - &v[7];
    let alift = &adx * &adx + &ady * &ady;
    let blift = &bdx * &bdx + &bdy * &bdy;
    let clift = &cdx * &cdx + &cdy * &cdy;
    let det = alift * (&bdx * &cdy - &cdx * &bdy)
        + blift * (&cdx * &ady - &adx * &cdy)
        + clift * (&adx * &bdy - &bdx * &ady);
    sign(&det)
}
