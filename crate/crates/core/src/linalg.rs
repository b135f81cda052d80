//! Dense matrix helpers shared by the phase-space and Fock modules.
//!
//! The matrix exponential follows the scaling-and-squaring scheme with
//! diagonal Padé approximants of degree 3, 5, 7, 9 or 13, picked from the
//! 1-norm of the input (Higham, SIAM J. Matrix Anal. Appl. 26, 2005).

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

pub type C64 = Complex64;

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scale<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, s: f64) -> DMatrix<T> {
    a.map(|v| v * T::from_real(s))
}

fn pade_low<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, b: &[f64]) -> DMatrix<T> {
    let n = a.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    // U = A * sum_k b[2k+1] A^{2k}, V = sum_k b[2k] A^{2k}
    let mut u_inner = scale(&id, b[1]);
    let mut v = scale(&id, b[0]);
    let mut power = id.clone();
    let m = b.len() - 1;
    let mut k = 2;
    while k <= m {
        power = &power * &a2;
        v += scale(&power, b[k]);
        if k + 1 <= m {
            u_inner += scale(&power, b[k + 1]);
        }
        k += 2;
    }
    let u = a * u_inner;
    solve_pade(&u, &v)
}

fn pade13<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let b = &B13;
    let id = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]);
    let u = a * (&a6 * u_hi + scale(&a6, b[7]) + scale(&a4, b[5]) + scale(&a2, b[3]) + scale(&id, b[1]));
    let v_hi = scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]);
    let v = &a6 * v_hi + scale(&a6, b[6]) + scale(&a4, b[4]) + scale(&a2, b[2]) + scale(&id, b[0]);
    solve_pade(&u, &v)
}

fn solve_pade<T: ComplexField<RealField = f64>>(u: &DMatrix<T>, v: &DMatrix<T>) -> DMatrix<T> {
    // r = (V - U)^{-1} (V + U)
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p).expect("Padé denominator is singular")
}

/// Matrix exponential by scaling and squaring.
pub fn expm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> DMatrix<T> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = norm1(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    for (m, theta) in THETA {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(a, b);
        }
    }
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
    let scaled = scale(a, 2f64.powi(-s));
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Frobenius norm of a real matrix difference.
pub fn frobenius_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Taylor series with many terms, valid for small-norm inputs.
    fn taylor(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
        let n = a.nrows();
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..terms {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn zero_gives_identity() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(expm(&z), DMatrix::identity(3, 3));
    }

    #[test]
    fn rotation_generator() {
        let phi = 0.7;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, phi, -phi, 0.0]);
        let e = expm(&a);
        let want = DMatrix::from_row_slice(2, 2, &[phi.cos(), phi.sin(), -phi.sin(), phi.cos()]);
        assert!((e - want).norm() < 1e-14);
    }

    #[test]
    fn matches_taylor_across_norm_regimes() {
        for scale in [0.005, 0.1, 0.5, 1.5, 4.0, 12.0] {
            let a = DMatrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.2 - 0.4) * scale;
            let e = expm(&a);
            // Taylor on a scaled-down copy, then square back.
            let k = 8;
            let mut t = taylor(&(&a / 2f64.powi(k)), 30);
            for _ in 0..k {
                t = &t * &t;
            }
            let rel = (&e - &t).norm() / t.norm();
            assert!(rel < 1e-12, "scale {scale}: rel err {rel}");
        }
    }

    #[test]
    fn complex_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c64(0.0, 1.0),
            c64(-0.5, 2.0),
            c64(3.0, 0.0),
        ]));
        let e = expm(&a);
        for i in 0..3 {
            let want = a[(i, i)].exp();
            assert!((e[(i, i)] - want).norm() < 1e-12 * want.norm().max(1.0));
        }
    }
}
