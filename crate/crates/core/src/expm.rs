//! Dense matrix exponential by scaling and squaring with diagonal Padé
//! approximants (Higham, SIAM J. Matrix Anal. Appl. 26, 2005).
//!
//! The matrices handled here are tiny (4×4 commutation superoperators and
//! their 8×8 block-triangular augmentations), so the implementation works
//! on stack-allocated `nalgebra` matrices and skips norm estimation in
//! favour of the exact 1-norm.

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 0.253939833006323;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
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
const PADE_13: [f64; 14] = [
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

pub(crate) fn one_norm<const D: usize>(m: &SMatrix<Complex64, D, D>) -> f64 {
    (0..D)
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential of a square complex matrix.
///
/// Fails only on non-finite input.
pub fn expm<const D: usize>(m: &SMatrix<Complex64, D, D>) -> Result<SMatrix<Complex64, D, D>> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("matrix exponential of non-finite entries"));
    }
    Ok(expm_unchecked(m))
}

pub(crate) fn expm_unchecked<const D: usize>(m: &SMatrix<Complex64, D, D>) -> SMatrix<Complex64, D, D> {
    let norm = one_norm(m);
    if norm == 0.0 {
        return SMatrix::identity();
    }
    let a2 = m * m;
    if norm <= THETA_3 {
        return pade_low(m, &a2, &PADE_3);
    }
    if norm <= THETA_5 {
        return pade_low(m, &a2, &PADE_5);
    }
    if norm <= THETA_7 {
        return pade_low(m, &a2, &PADE_7);
    }
    if norm <= THETA_9 {
        return pade_low(m, &a2, &PADE_9);
    }

    let squarings = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scale = Complex64::from(0.5f64.powi(squarings));
    let scaled = m * scale;
    let a2 = a2 * (scale * scale);
    let mut r = pade_13(&scaled, &a2);
    for _ in 0..squarings {
        r = r * r;
    }
    r
}

/// Padé approximant of degree 3, 5, 7 or 9 (coefficient slice length − 1).
fn pade_low<const D: usize>(
    a: &SMatrix<Complex64, D, D>,
    a2: &SMatrix<Complex64, D, D>,
    b: &[f64],
) -> SMatrix<Complex64, D, D> {
    let ident = SMatrix::<Complex64, D, D>::identity();
    let mut power = ident;
    let mut u = ident * Complex64::from(b[1]);
    let mut v = ident * Complex64::from(b[0]);
    for k in 1..b.len() / 2 {
        power *= a2;
        u += power * Complex64::from(b[2 * k + 1]);
        v += power * Complex64::from(b[2 * k]);
    }
    let u = a * u;
    solve_pade(&u, &v)
}

fn pade_13<const D: usize>(
    a: &SMatrix<Complex64, D, D>,
    a2: &SMatrix<Complex64, D, D>,
) -> SMatrix<Complex64, D, D> {
    let b = &PADE_13;
    let c = |x: f64| Complex64::from(x);
    let ident = SMatrix::<Complex64, D, D>::identity();
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let inner_u = a6 * c(b[13]) + a4 * c(b[11]) + a2 * c(b[9]);
    let u = a * (a6 * inner_u
        + a6 * c(b[7])
        + a4 * c(b[5])
        + a2 * c(b[3])
        + ident * c(b[1]));
    let inner_v = a6 * c(b[12]) + a4 * c(b[10]) + a2 * c(b[8]);
    let v = a6 * inner_v + a6 * c(b[6]) + a4 * c(b[4]) + a2 * c(b[2]) + ident * c(b[0]);
    solve_pade(&u, &v)
}

fn solve_pade<const D: usize>(
    u: &SMatrix<Complex64, D, D>,
    v: &SMatrix<Complex64, D, D>,
) -> SMatrix<Complex64, D, D> {
    solve_in_place(v - u, v + u)
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
fn solve_in_place<const D: usize>(
    mut a: SMatrix<Complex64, D, D>,
    mut b: SMatrix<Complex64, D, D>,
) -> SMatrix<Complex64, D, D> {
    for col in 0..D {
        let pivot = (col..D)
            .max_by(|&i, &j| a[(i, col)].norm_sqr().total_cmp(&a[(j, col)].norm_sqr()))
            .unwrap();
        if pivot != col {
            a.swap_rows(pivot, col);
            b.swap_rows(pivot, col);
        }
        let inv = a[(col, col)].inv();
        for row in col + 1..D {
            let factor = a[(row, col)] * inv;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..D {
                let t = a[(col, k)];
                a[(row, k)] -= factor * t;
            }
            for k in 0..D {
                let t = b[(col, k)];
                b[(row, k)] -= factor * t;
            }
        }
    }
    for col in (0..D).rev() {
        let inv = a[(col, col)].inv();
        for k in 0..D {
            let mut acc = b[(col, k)];
            for j in col + 1..D {
                acc -= a[(col, j)] * b[(j, k)];
            }
            b[(col, k)] = acc * inv;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix4, SMatrix};

    type M4 = Matrix4<Complex64>;
    type M8 = SMatrix<Complex64, 8, 8>;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs<const D: usize>(m: &SMatrix<Complex64, D, D>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_gives_identity() {
        assert_eq!(expm(&M8::zeros()).unwrap(), M8::identity());
    }

    #[test]
    fn diagonal_exponentiates_entrywise() {
        let entries = [c(0.3, -1.0), c(-2.0, 0.5), c(1.5, 4.0), c(0.0, -7.0)];
        let m = M4::from_diagonal(&nalgebra::Vector4::from(entries));
        let e = expm(&m).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { entries[i].exp() } else { c(0.0, 0.0) };
                assert!((e[(i, j)] - want).norm() <= 1e-13 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn nilpotent_series_truncates() {
        let mut m = M4::zeros();
        m[(0, 2)] = c(3.0, 1.0);
        m[(1, 3)] = c(-2.0, 0.5);
        m[(0, 3)] = c(0.25, 0.0);
        assert_eq!(m * m, M4::zeros());
        let e = expm(&m).unwrap();
        assert!(max_abs(&(e - (M4::identity() + m))) < 1e-14);
    }

    #[test]
    fn large_norm_path_matches_nalgebra() {
        // independent implementation as a cross-check over every Padé branch
        let base = M4::from_fn(|i, j| c((i as f64 + 1.0) * 0.37 - j as f64 * 0.21, (i * j) as f64 * 0.13 - 0.2));
        for scale in [1e-3, 0.1, 0.5, 1.5, 3.0, 20.0, 150.0] {
            let m = base * c(scale, 0.0);
            let ours = expm(&m).unwrap();
            let theirs = m.exp();
            let rel = max_abs(&(ours - theirs)) / max_abs(&theirs);
            assert!(rel < 1e-11, "scale {scale}: rel {rel:e}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = M4::zeros();
        m[(1, 1)] = c(f64::NAN, 0.0);
        assert!(expm(&m).is_err());
    }
}
