//! Complex SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! nalgebra's bidiagonal complex SVD returns factorizations that do not
//! reproduce their input for some small rank-one Hankel matrices built from
//! a single cisoid, so the recovery path uses this routine instead. Results
//! are packed into nalgebra's `SVD` so `solve`, `pseudo_inverse` and
//! `recompose` still apply.

use nalgebra::{DMatrix, DVector, Dyn, SVD};
use num_complex::Complex;

use crate::scalar::{cis, Cplx, Real};

pub(crate) type CSvd<T> = SVD<Cplx<T>, Dyn, Dyn>;

/// `(U, sigma, V)`.
type ThinSvd<T> = (DMatrix<Cplx<T>>, Vec<T>, DMatrix<Cplx<T>>);

const MAX_SWEEPS: usize = 80;

fn col_dot<T: Real>(g: &DMatrix<Cplx<T>>, p: usize, q: usize) -> Cplx<T> {
    g.column(p)
        .iter()
        .zip(g.column(q).iter())
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
}

fn col_norm_sqr<T: Real>(g: &DMatrix<Cplx<T>>, p: usize) -> T {
    g.column(p).iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// `[g_p, g_q] <- [g_p, g_q] [[c, s], [-s e, c e]]` with `e = exp(-j phi)`.
fn rotate<T: Real>(g: &mut DMatrix<Cplx<T>>, p: usize, q: usize, c: T, s: T, e: Cplx<T>) {
    for r in 0..g.nrows() {
        let (a, b) = (g[(r, p)], g[(r, q)]);
        let be = b * e;
        g[(r, p)] = a.scale(c) - be.scale(s);
        g[(r, q)] = a.scale(s) + be.scale(c);
    }
}

/// Thin SVD of a matrix with at least as many rows as columns.
fn jacobi_tall<T: Real>(a: &DMatrix<Cplx<T>>) -> Option<ThinSvd<T>> {
    let n = a.ncols();
    let mut g = a.clone();
    let mut v = DMatrix::<Cplx<T>>::identity(n, n);
    let eps = T::default_epsilon();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = col_norm_sqr(&g, p);
                let beta = col_norm_sqr(&g, q);
                let gamma = col_dot(&g, p, q);
                let mag = gamma.norm_sqr().sqrt();
                if !(mag > eps * (alpha * beta).sqrt()) {
                    continue;
                }
                rotated = true;
                let e = cis(-crate::scalar::carg(gamma));
                let zeta = (beta - alpha) / (mag + mag);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut g, p, q, c, s, e);
                rotate(&mut v, p, q, c, s, e);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<T> = (0..n).map(|j| col_norm_sqr(&g, j).sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let m = a.nrows();
    let mut u = DMatrix::from_element(m, n, Complex::new(T::zero(), T::zero()));
    let mut vs = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
    let mut sv = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        if s > T::zero() {
            u.set_column(k, &g.column(j).map(|z| z.unscale(s)));
        }
        vs.set_column(k, &v.column(j));
        sv.push(s);
    }
    Some((u, sv, vs))
}

/// Thin SVD, singular values descending. `None` if the sweeps do not
/// converge.
pub(crate) fn svd<T: Real>(a: &DMatrix<Cplx<T>>) -> Option<CSvd<T>> {
    let (m, n) = a.shape();
    if m >= n {
        let (u, s, v) = jacobi_tall(a)?;
        Some(SVD { u: Some(u), v_t: Some(v.adjoint()), singular_values: DVector::from_vec(s) })
    } else {
        // A^H = U' S V'^H  =>  A = V' S U'^H
        let (u2, s, v2) = jacobi_tall(&a.adjoint())?;
        Some(SVD { u: Some(v2), v_t: Some(u2.adjoint()), singular_values: DVector::from_vec(s) })
    }
}

/// Moore-Penrose pseudo-inverse, dropping singular values at or below
/// `rel_tol * sigma_max`.
pub(crate) fn pinv<T: Real>(a: &DMatrix<Cplx<T>>, rel_tol: T) -> Option<DMatrix<Cplx<T>>> {
    let s = svd(a)?;
    let smax = s.singular_values.iter().cloned().fold(T::zero(), |x, v| x.max(v));
    s.pseudo_inverse(smax * rel_tol).ok()
}
