//! Dense complex linear algebra kernels used by the operator layer: matrix
//! exponential (Pade scaling-and-squaring), Hermitian eigendecomposition
//! (cyclic Jacobi) and the small helpers they need.
//!
//! Everything here works on raw `Array2<Complex64>`; the layout-aware wrappers
//! live in [`crate::operator`]. Dimensions in this code base stay at desk
//! scale (a few hundred at most), so the kernels favour robustness and
//! determinism over asymptotic tricks.

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not Hermitian: max |M - M^dag| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("linear solve hit a numerically singular pivot")]
    SingularPivot,
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// Largest entry modulus.
pub fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm(a: &Array2<Complex64>) -> f64 {
    let (rows, cols) = a.dim();
    let mut best = 0.0_f64;
    for j in 0..cols {
        let mut sum = 0.0;
        for i in 0..rows {
            sum += a[[i, j]].norm();
        }
        best = best.max(sum);
    }
    best
}

/// Frobenius norm.
pub fn frobenius(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Tr[A B]` without forming the product matrix.
pub fn trace_product(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

/// Max deviation from Hermiticity, `max_ij |A_ij - conj(A_ji)|`.
pub fn hermiticity_deviation(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    dev
}

pub fn identity(n: usize) -> Array2<Complex64> {
    Array2::eye(n)
}

fn check_square(a: &Array2<Complex64>) -> Result<usize, LinalgError> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    Ok(rows)
}

fn check_finite(a: &Array2<Complex64>) -> Result<(), LinalgError> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Solve `A X = B` by LU decomposition with partial pivoting. `A` is consumed
/// as the factorization workspace.
fn lu_solve(
    mut a: Array2<Complex64>,
    mut b: Array2<Complex64>,
) -> Result<Array2<Complex64>, LinalgError> {
    let n = a.nrows();
    let m = b.ncols();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot = col;
        let mut pivot_mag = a[[perm[col], col]].norm();
        for row in col + 1..n {
            let mag = a[[perm[row], col]].norm();
            if mag > pivot_mag {
                pivot = row;
                pivot_mag = mag;
            }
        }
        if pivot_mag == 0.0 {
            return Err(LinalgError::SingularPivot);
        }
        perm.swap(col, pivot);
        let p = perm[col];
        let diag = a[[p, col]];
        for row in col + 1..n {
            let r = perm[row];
            let factor = a[[r, col]] / diag;
            a[[r, col]] = factor;
            for k in col + 1..n {
                let sub = factor * a[[p, k]];
                a[[r, k]] -= sub;
            }
            for k in 0..m {
                let sub = factor * b[[p, k]];
                b[[r, k]] -= sub;
            }
        }
    }
    let mut x = Array2::zeros((n, m));
    for k in 0..m {
        for row in (0..n).rev() {
            let r = perm[row];
            let mut acc = b[[r, k]];
            for col in row + 1..n {
                acc -= a[[r, col]] * x[[col, k]];
            }
            x[[row, k]] = acc / a[[r, row]];
        }
    }
    Ok(x)
}

/// Matrix exponential by the degree-13 Pade approximant with scaling and
/// squaring. Relative accuracy is at the 1e-13 level for `||A||_1 <= 10`,
/// comfortably inside the 1e-12 contract of the operator layer.
pub fn expm(a: &Array2<Complex64>) -> Result<Array2<Complex64>, LinalgError> {
    let n = check_square(a)?;
    check_finite(a)?;
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }

    // Pade-13 coefficients.
    const B: [f64; 14] = [
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
    const THETA_13: f64 = 5.371920351148152;

    let norm = one_norm(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scale = Complex64::new(1.0 / f64::powi(2.0, squarings as i32), 0.0);
    let a = a.mapv(|z| z * scale);

    let eye = identity(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let mut u_inner = a6.mapv(|z| z * B[13]);
    u_inner = &u_inner + &a4.mapv(|z| z * B[11]);
    u_inner = &u_inner + &a2.mapv(|z| z * B[9]);
    let mut u = a6.dot(&u_inner);
    u = &u + &a6.mapv(|z| z * B[7]);
    u = &u + &a4.mapv(|z| z * B[5]);
    u = &u + &a2.mapv(|z| z * B[3]);
    u = &u + &eye.mapv(|z| z * B[1]);
    let u = a.dot(&u);

    let mut v_inner = a6.mapv(|z| z * B[12]);
    v_inner = &v_inner + &a4.mapv(|z| z * B[10]);
    v_inner = &v_inner + &a2.mapv(|z| z * B[8]);
    let mut v = a6.dot(&v_inner);
    v = &v + &a6.mapv(|z| z * B[6]);
    v = &v + &a4.mapv(|z| z * B[4]);
    v = &v + &a2.mapv(|z| z * B[2]);
    v = &v + &eye.mapv(|z| z * B[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut x = lu_solve(q, p)?;
    for _ in 0..squarings {
        x = x.dot(&x);
    }
    Ok(x)
}

/// Eigendecomposition of a Hermitian matrix by the cyclic complex Jacobi
/// method. Returns eigenvalues in ascending order and the matching unitary of
/// column eigenvectors. The input must satisfy the Hermiticity tolerance
/// `max |A - A^dag| <= hermiticity_tol * max(|A|, 1)` checked by the caller;
/// this routine symmetrizes once and iterates to machine precision.
pub fn hermitian_eigen_raw(
    a: &Array2<Complex64>,
) -> Result<(Vec<f64>, Array2<Complex64>), LinalgError> {
    let n = check_square(a)?;
    check_finite(a)?;
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }

    // Work on the Hermitian average so tiny asymmetries cannot bias rotations.
    let mut m = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]].conj());
        }
    }
    let mut v = identity(n);
    let scale = frobenius(&m).max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;
    const MAX_SWEEPS: usize = 100;

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                off += m[[p, q]].norm_sqr();
            }
        }
        let off = off.sqrt() * std::f64::consts::SQRT_2;
        if off <= tol {
            break;
        }
        if sweep == MAX_SWEEPS - 1 {
            return Err(LinalgError::NoConvergence {
                sweeps: MAX_SWEEPS,
                off,
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                let mag = apq.norm();
                if mag <= tol / (n as f64) {
                    continue;
                }
                // Phase that makes the pivot real, then a real Jacobi rotation.
                let phase = apq / mag; // e^{i alpha}
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Column rotation R on (p, q):
                //   col_p <- c*col_p - s*conj(phase)*col_q
                //   col_q <- s*phase*col_p + c*col_q
                let cp = Complex64::new(c, 0.0);
                let sp = phase * s;
                for i in 0..n {
                    let mip = m[[i, p]];
                    let miq = m[[i, q]];
                    m[[i, p]] = cp * mip - sp.conj() * miq;
                    m[[i, q]] = sp * mip + cp * miq;
                }
                for i in 0..n {
                    let mpi = m[[p, i]];
                    let mqi = m[[q, i]];
                    m[[p, i]] = cp * mpi - sp * mqi;
                    m[[q, i]] = sp.conj() * mpi + cp * mqi;
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = cp * vip - sp.conj() * viq;
                    v[[i, q]] = sp * vip + cp * viq;
                }
                // Clean the annihilated pair and diagonal imaginary dust.
                m[[p, q]] = Complex64::new(0.0, 0.0);
                m[[q, p]] = Complex64::new(0.0, 0.0);
                m[[p, p]] = Complex64::new(m[[p, p]].re, 0.0);
                m[[q, q]] = Complex64::new(m[[q, q]].re, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].re.partial_cmp(&m[[j, j]].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[[i, i]].re).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, dst]] = v[[i, src]];
        }
    }
    Ok((eigenvalues, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_complex_matrix(n: usize, rng: &mut ChaCha8Rng) -> Array2<Complex64> {
        Array2::from_shape_fn((n, n), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Array2<Complex64> {
        let g = random_complex_matrix(n, rng);
        let gd = dagger(&g);
        (&g + &gd).mapv(|z| 0.5 * z)
    }

    #[test]
    fn expm_zero_is_identity() {
        let z = Array2::<Complex64>::zeros((4, 4));
        let e = expm(&z).unwrap();
        assert!(max_abs(&(&e - &identity(4))) < 1e-15);
    }

    #[test]
    fn expm_nilpotent_shift() {
        let mut a = Array2::<Complex64>::zeros((2, 2));
        a[[0, 1]] = Complex64::new(1.0, 0.0);
        let e = expm(&a).unwrap();
        assert_abs_diff_eq!(e[[0, 0]].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[0, 1]].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[1, 1]].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[[1, 0]].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn expm_diagonal_phases() {
        // exp(i*pi*diag(1,2)) = diag(-1, 1)
        let mut a = Array2::<Complex64>::zeros((2, 2));
        a[[0, 0]] = Complex64::new(0.0, std::f64::consts::PI);
        a[[1, 1]] = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let e = expm(&a).unwrap();
        assert!((e[[0, 0]] - Complex64::new(-1.0, 0.0)).norm() < 1e-13);
        assert!((e[[1, 1]] - Complex64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn expm_of_skew_hermitian_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 6, 10] {
            let h = random_hermitian(n, &mut rng);
            let ih = h.mapv(|z| Complex64::new(0.0, -1.0) * z);
            let u = expm(&ih).unwrap();
            let gram = dagger(&u).dot(&u);
            assert!(
                max_abs(&(&gram - &identity(n))) < 1e-12,
                "U^dag U != I at n={n}"
            );
        }
    }

    #[test]
    fn expm_matches_eigen_route_for_hermitian_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(6, &mut rng);
        let (vals, vecs) = hermitian_eigen_raw(&h).unwrap();
        let mut d = Array2::<Complex64>::zeros((6, 6));
        for (i, &l) in vals.iter().enumerate() {
            d[[i, i]] = Complex64::new(l.exp(), 0.0);
        }
        let via_eigen = vecs.dot(&d).dot(&dagger(&vecs));
        let via_pade = expm(&h).unwrap();
        assert!(max_abs(&(&via_eigen - &via_pade)) < 1e-11 * max_abs(&via_pade).max(1.0));
    }

    #[test]
    fn eigen_diagonal_is_sorted() {
        let mut a = Array2::<Complex64>::zeros((3, 3));
        a[[0, 0]] = Complex64::new(3.0, 0.0);
        a[[1, 1]] = Complex64::new(1.0, 0.0);
        a[[2, 2]] = Complex64::new(2.0, 0.0);
        let (vals, _) = hermitian_eigen_raw(&a).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigen_pauli_x() {
        let mut a = Array2::<Complex64>::zeros((2, 2));
        a[[0, 1]] = Complex64::new(1.0, 0.0);
        a[[1, 0]] = Complex64::new(1.0, 0.0);
        let (vals, vecs) = hermitian_eigen_raw(&a).unwrap();
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
        let gram = dagger(&vecs).dot(&vecs);
        assert!(max_abs(&(&gram - &identity(2))) < 1e-14);
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [2usize, 5, 8, 17] {
            let h = random_hermitian(n, &mut rng);
            let (vals, vecs) = hermitian_eigen_raw(&h).unwrap();
            let mut d = Array2::<Complex64>::zeros((n, n));
            for (i, &l) in vals.iter().enumerate() {
                d[[i, i]] = Complex64::new(l, 0.0);
            }
            let rebuilt = vecs.dot(&d).dot(&dagger(&vecs));
            let err = max_abs(&(&rebuilt - &h));
            assert!(err <= 1e-12 * max_abs(&h).max(1.0), "n={n}: err={err:.3e}");
            let gram = dagger(&vecs).dot(&vecs);
            assert!(max_abs(&(&gram - &identity(n))) < 1e-12);
            for w in vals.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn lu_solve_recovers_inverse_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_complex_matrix(6, &mut rng);
        let x = random_complex_matrix(6, &mut rng);
        let b = a.dot(&x);
        let solved = lu_solve(a.clone(), b).unwrap();
        assert!(max_abs(&(&solved - &x)) < 1e-10);
    }
}
