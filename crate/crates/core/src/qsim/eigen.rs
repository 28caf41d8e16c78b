// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! Cyclic Jacobi eigensolver for small Hermitian matrices.

use num_complex::Complex64;

use super::matrix::CMatrix;

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition `H = V diag(values) V†` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Diagonalizes a Hermitian matrix by complex Jacobi rotations.
///
/// Only the upper triangle's information is trusted; the caller is expected
/// to have checked Hermiticity.
pub fn hermitian_eigen(h: &CMatrix) -> HermitianEigen {
    let n = h.dim();
    let mut a = h.clone();
    let mut v = CMatrix::identity(n);

    let scale = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| h[(r, c)].norm_sqr())
        .sum::<f64>()
        .sqrt();
    let tol = f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| ((r + 1)..n).map(move |c| (r, c)))
            .map(|(r, c)| a[(r, c)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    HermitianEigen {
        values: (0..n).map(|i| a[(i, i)].re).collect(),
        vectors: v,
    }
}

/// Annihilates `a[p][q]` with a unitary plane rotation `W`:
/// `A <- W† A W`, `V <- V W`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;

    // Phase e^{-iφ} on q makes the (p, q) element real, then a real
    // symmetric Jacobi rotation finishes the job.
    let phase = (apq / r).conj();
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // W restricted to (p, q):
    //   [ c            s          ]
    //   [ -s·phase     c·phase    ]
    let w_pp = Complex64::new(c, 0.0);
    let w_pq = Complex64::new(s, 0.0);
    let w_qp = phase * (-s);
    let w_qq = phase * c;

    let n = a.dim();
    // A <- A W (columns p, q)
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * w_pp + akq * w_qp;
        a[(k, q)] = akp * w_pq + akq * w_qq;
    }
    // A <- W† A (rows p, q)
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = w_pp.conj() * apk + w_qp.conj() * aqk;
        a[(q, k)] = w_pq.conj() * apk + w_qq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * w_pp + vkq * w_qp;
        v[(k, q)] = vkp * w_pq + vkq * w_qq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &HermitianEigen) -> CMatrix {
        let d = CMatrix::from_real_diagonal(&e.values);
        (&e.vectors * &d).mul_adjoint(&e.vectors)
    }

    #[test]
    fn diagonal_input_is_untouched() {
        let h = CMatrix::from_real_diagonal(&[3.0, -1.0, 2.0]);
        let e = hermitian_eigen(&h);
        assert_eq!(e.values, vec![3.0, -1.0, 2.0]);
        assert_eq!(e.vectors, CMatrix::identity(3));
    }

    #[test]
    fn complex_two_by_two() {
        // sigma_y has eigenvalues ±1
        let h = CMatrix::from_rows(&[
            vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
            vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
        ]);
        let e = hermitian_eigen(&h);
        let mut vals = e.values.clone();
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        assert!(reconstruct(&e).max_abs_diff(&h) < 1e-14);
        assert!(e.vectors.unitarity_defect() < 1e-14);
    }

    #[test]
    fn dense_four_by_four_reconstructs() {
        let h = CMatrix::from_fn(4, |r, c| {
            let re = ((r + 1) * (c + 2)) as f64 % 5.0 - 2.0;
            let re = if r == c { re } else { re + ((r * c) as f64 % 3.0) };
            Complex64::new(re, 0.0)
        });
        let sym = (&h + &h.adjoint()).scale_real(0.5);
        let skew = CMatrix::from_fn(4, |r, c| {
            let x = (r as f64 - c as f64) * 0.7;
            Complex64::new(0.0, x)
        });
        let herm = &sym + &skew;
        assert!(herm.hermitian_deviation() < 1e-15);
        let e = hermitian_eigen(&herm);
        assert!(reconstruct(&e).max_abs_diff(&herm) < 1e-12);
        assert!(e.vectors.unitarity_defect() < 1e-13);
    }
}
