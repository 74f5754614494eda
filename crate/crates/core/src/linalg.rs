//! Dense linear-algebra kernels: a cyclic Jacobi eigensolver for real
//! symmetric matrices, Gram-Schmidt orthonormalization, and the eigenphases
//! of real orthogonal matrices.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type CVector = DVector<Complex<f64>>;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// symmetric matrix. Only the lower triangle is read.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigen needs a square matrix");
    let mut m = DMatrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm();
    if n <= 1 || scale == 0.0 {
        return Ok(sorted((0..n).map(|i| m[(i, i)]).collect(), v));
    }

    let off = |m: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for i in (j + 1)..n {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > 1e-15 * scale {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                dim: n,
                sweeps,
                residual: off(&m) / scale,
            });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let (app, aqq) = (m[(p, p)], m[(q, q)]);
                // Negligible relative to both diagonal entries: drop it.
                if sweeps > 4 && apq.abs() < f64::EPSILON * 1e-2 * (app.abs().min(aqq.abs())) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(sorted((0..n).map(|i| m[(i, i)]).collect(), v))
}

fn sorted(values: Vec<f64>, vectors: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let vals = order.iter().map(|&i| values[i]).collect();
    let vecs = DMatrix::from_fn(vectors.nrows(), order.len(), |r, c| vectors[(r, order[c])]);
    (vals, vecs)
}

/// Orthonormal basis (as columns) of the span of `vectors`. Directions whose
/// residual after projection falls below `rel_tol` times their original
/// norm are treated as dependent and dropped.
pub fn orthonormal_basis(vectors: &[DVector<f64>], dim: usize, rel_tol: f64) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        assert_eq!(v.len(), dim);
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&w);
                w.axpy(-proj, b, 1.0);
            }
        }
        let norm = w.norm();
        if norm > rel_tol * norm0 {
            basis.push(w / norm);
        }
    }
    columns(&basis, dim)
}

/// Stacks vectors as matrix columns; an empty list gives a `dim x 0` matrix.
pub fn columns(vectors: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c][r])
}

/// One eigenpair of an orthogonal matrix: `U v = e^{i theta} v`.
#[derive(Clone, Debug)]
pub struct UnitaryEigenpair {
    pub theta: f64,
    pub vector: CVector,
}

/// Complete eigendecomposition of a real orthogonal matrix through its real
/// Schur form. Eigenphases lie in (-pi, pi].
pub fn orthogonal_eigen(u: &DMatrix<f64>) -> Result<Vec<UnitaryEigenpair>> {
    let n = u.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(u.clone(), 1e-13, 10_000).ok_or(
        Error::NoConvergence {
            dim: n,
            sweeps: 10_000,
            residual: f64::NAN,
        },
    )?;
    let (q, t) = schur.unpack();
    let mut pairs = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let block = i + 1 < n && t[(i + 1, i)].abs() > 1e-14;
        if !block {
            let lambda = t[(i, i)];
            let vector = q.column(i).map(|x| Complex::new(x, 0.0));
            pairs.push(UnitaryEigenpair {
                theta: wrap_phase(0.0f64.atan2(lambda)),
                vector,
            });
            i += 1;
            continue;
        }
        let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let half_trace = 0.5 * (a + d);
        let disc = 0.25 * (a - d) * (a - d) + b * c;
        let root = Complex::new(disc, 0.0).sqrt();
        for lambda in [Complex::new(half_trace, 0.0) + root, Complex::new(half_trace, 0.0) - root] {
            // Null vector of (B - lambda I), taken from whichever row is better conditioned.
            let w1 = (Complex::new(b, 0.0), lambda - a);
            let w2 = (lambda - d, Complex::new(c, 0.0));
            let (w0, w1) = if w1.0.norm_sqr() + w1.1.norm_sqr() >= w2.0.norm_sqr() + w2.1.norm_sqr() {
                w1
            } else {
                w2
            };
            let mut vector = CVector::from_fn(n, |r, _| {
                w0 * q[(r, i)] + w1 * q[(r, i + 1)]
            });
            let norm = vector.norm();
            vector /= Complex::new(norm, 0.0);
            pairs.push(UnitaryEigenpair {
                theta: wrap_phase(lambda.im.atan2(lambda.re)),
                vector,
            });
        }
        i += 2;
    }

    let worst = pairs
        .iter()
        .map(|p| unitary_residual(u, p))
        .fold(0.0, f64::max);
    if worst > 1e-9 {
        return Err(Error::NoConvergence {
            dim: n,
            sweeps: 0,
            residual: worst,
        });
    }
    Ok(pairs)
}

/// `|| U v - e^{i theta} v ||` for a computed pair.
pub fn unitary_residual(u: &DMatrix<f64>, pair: &UnitaryEigenpair) -> f64 {
    let n = u.nrows();
    let phase = Complex::from_polar(1.0, pair.theta);
    let mut s = 0.0;
    for r in 0..n {
        let mut acc = Complex::new(0.0, 0.0);
        for c in 0..n {
            acc += pair.vector[c] * u[(r, c)];
        }
        s += (acc - pair.vector[r] * phase).norm_sqr();
    }
    s.sqrt()
}

/// Maps an angle into (-pi, pi].
pub fn wrap_phase(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Symmetric Gram matrix `A^T A` restricted to the given rows of `A`.
pub fn row_gram(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let k = a.ncols();
    DMatrix::from_fn(k, k, |i, j| rows.iter().map(|&r| a[(r, i)] * a[(r, j)]).sum())
}
