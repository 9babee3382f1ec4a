//! Small dense complex linear algebra kernels: Hermitian eigensolver,
//! adjoints, norms. Matrices here are tiny (at most a few hundred rows), so
//! a cyclic Jacobi iteration is accurate and fast enough; no external
//! LAPACK backend is needed.

use ndarray::{Array1, Array2};
use num_complex::Complex;

use crate::scalar::{cr, Real, C};

/// Conjugate transpose.
pub fn adjoint<T: Real>(m: &Array2<C<T>>) -> Array2<C<T>> {
    let (rows, cols) = m.dim();
    Array2::from_shape_fn((cols, rows), |(i, j)| m[[j, i]].conj())
}

/// Hermitian part `(M + M†)/2`.
pub fn hermitize<T: Real>(m: &Array2<C<T>>) -> Array2<C<T>> {
    let half = cr(T::lit(0.5));
    let adj = adjoint(m);
    (m + &adj).mapv(|z| z * half)
}

pub fn frobenius_norm<T: Real>(m: &Array2<C<T>>) -> T {
    m.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

pub fn max_abs_entry<T: Real>(m: &Array2<C<T>>) -> T {
    m.iter().map(|z| z.norm()).fold(T::zero(), T::max)
}

pub fn is_hermitian<T: Real>(m: &Array2<C<T>>, tol: T) -> bool {
    let adj = adjoint(m);
    frobenius_norm(&(m - &adj)) <= tol
}

/// Outer product `v w†`.
pub fn outer<T: Real>(v: &Array1<C<T>>, w: &Array1<C<T>>) -> Array2<C<T>> {
    let n = v.len();
    let m = w.len();
    Array2::from_shape_fn((n, m), |(i, j)| v[i] * w[j].conj())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh<T: Real>(m: &Array2<C<T>>) -> Vec<T> {
    let (vals, _) = jacobi(m.clone(), false);
    vals
}

/// Eigen-decomposition of a Hermitian matrix: `(values, vectors)` with
/// eigenvalues ascending and eigenvectors as the corresponding columns.
pub fn eigh<T: Real>(m: &Array2<C<T>>) -> (Vec<T>, Array2<C<T>>) {
    let (vals, vecs) = jacobi(m.clone(), true);
    (vals, vecs.expect("vectors requested"))
}

/// Cyclic Jacobi iteration for complex Hermitian matrices.
///
/// Each rotation zeroes one off-diagonal pair with the unitary
/// `V = [[c, -s u], [s conj(u), c]]`, where `u` is the phase of the pivot
/// entry. Quadratic convergence sets in after a couple of sweeps; the
/// iteration stops when the off-diagonal Frobenius norm falls below a small
/// multiple of machine epsilon relative to the input norm.
fn jacobi<T: Real>(mut a: Array2<C<T>>, want_vectors: bool) -> (Vec<T>, Option<Array2<C<T>>>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigensolver needs a square matrix");
    let scale = frobenius_norm(&a);
    let mut vecs = want_vectors.then(|| Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j { C::new(T::one(), T::zero()) } else { C::new(T::zero(), T::zero()) }
    }));

    if n <= 1 || scale == T::zero() {
        let vals = (0..n).map(|i| a[[i, i]].re).collect();
        return (vals, vecs);
    }

    let stop = scale * T::epsilon() * T::lit(8.0);
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]].norm_sqr();
            }
        }
        if (off + off).sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                let r = apq.norm();
                if r <= scale * T::epsilon() {
                    continue;
                }
                let u = apq / cr(r);
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let theta = (aqq - app) / (r + r);
                // Smaller root of t^2 - 2 theta t - 1 = 0.
                let t = if theta == T::zero() {
                    T::one()
                } else {
                    -theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;

                let cc = cr(c);
                let su = u * cr(s);
                let su_conj = u.conj() * cr(s);

                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[[i, p]];
                    let aiq = a[[i, q]];
                    a[[i, p]] = aip * cc + aiq * su_conj;
                    a[[i, q]] = aiq * cc - aip * su;
                    a[[p, i]] = a[[i, p]].conj();
                    a[[q, i]] = a[[i, q]].conj();
                }
                let c2 = c * c;
                let s2 = s * s;
                let cross = T::lit(2.0) * r * s * c;
                a[[p, p]] = cr(app * c2 + aqq * s2 + cross);
                a[[q, q]] = cr(app * s2 + aqq * c2 - cross);
                a[[p, q]] = C::new(T::zero(), T::zero());
                a[[q, p]] = C::new(T::zero(), T::zero());

                if let Some(v) = vecs.as_mut() {
                    for i in 0..n {
                        let vip = v[[i, p]];
                        let viq = v[[i, q]];
                        v[[i, p]] = vip * cc + viq * su_conj;
                        v[[i, q]] = viq * cc - vip * su;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| a[[i, i]].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));
    let vals: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let vecs = vecs.map(|v| {
        let mut sorted = Array2::from_elem((n, n), C::new(T::zero(), T::zero()));
        for (new_col, &old_col) in order.iter().enumerate() {
            for i in 0..n {
                sorted[[i, new_col]] = v[[i, old_col]];
            }
        }
        sorted
    });
    (vals, vecs)
}

/// Sum of singular values, computed from the Hermitian PSD matrix `M† M`.
pub fn singular_value_sum<T: Real>(m: &Array2<C<T>>) -> T {
    let gram = adjoint(m).dot(m);
    eigvalsh(&gram)
        .into_iter()
        .map(|v| v.max(T::zero()).sqrt())
        .sum()
}

/// Hermitian square root `M^{1/2}` for a PSD matrix; tiny negative
/// eigenvalues from rounding are clamped to zero.
pub fn sqrtm_psd<T: Real>(m: &Array2<C<T>>) -> Array2<C<T>> {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for (j, v) in vals.iter().enumerate() {
        let root = cr(v.max(T::zero()).sqrt());
        for i in 0..n {
            scaled[[i, j]] = scaled[[i, j]] * root;
        }
    }
    scaled.dot(&adjoint(&vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    fn example_hermitian() -> Array2<C<f64>> {
        ndarray::array![
            [c(2.0, 0.0), c(0.5, 0.25), c(0.0, -1.0)],
            [c(0.5, -0.25), c(-1.0, 0.0), c(0.3, 0.0)],
            [c(0.0, 1.0), c(0.3, 0.0), c(0.5, 0.0)],
        ]
    }

    #[test]
    fn two_by_two_analytic() {
        // Pauli X has eigenvalues -1, +1.
        let m = ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let vals = eigvalsh(&m);
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_reconstructs_matrix() {
        let m = example_hermitian();
        let (vals, vecs) = eigh(&m);
        let n = m.nrows();
        let mut rebuilt = Array2::from_elem((n, n), c(0.0, 0.0));
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    rebuilt[[i, j]] += vecs[[i, k]] * vecs[[j, k]].conj() * cr(vals[k]);
                }
            }
        }
        assert!(frobenius_norm(&(&rebuilt - &m)) < 1e-12);
    }

    #[test]
    fn eigenvalue_sum_matches_trace() {
        let m = example_hermitian();
        let vals = eigvalsh(&m);
        let trace: f64 = (0..3).map(|i| m[[i, i]].re).sum();
        assert!((vals.iter().sum::<f64>() - trace).abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = ndarray::array![[c(-3.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 4.0)]];
        assert!((singular_value_sum(&m) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn sqrtm_squares_back() {
        let m = example_hermitian();
        // Make it PSD by shifting the spectrum.
        let shift = 3.0;
        let n = m.nrows();
        let mut psd = m.clone();
        for i in 0..n {
            psd[[i, i]] += c(shift, 0.0);
        }
        let root = sqrtm_psd(&psd);
        let back = root.dot(&root);
        assert!(frobenius_norm(&(&back - &psd)) < 1e-11);
    }
}
