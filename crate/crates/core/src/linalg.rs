//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::SymmetricEigen;

use crate::{CMatrix, Complex64, Error, Result};

/// Gram condition numbers above this make zero forcing refuse to invert.
pub const MAX_GRAM_CONDITION: f64 = 1e8;

/// Eigenvalue condition number of a Hermitian positive semi-definite matrix.
///
/// Returns `f64::INFINITY` when the smallest eigenvalue is not positive.
pub fn hermitian_condition(k: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(k.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(lo > 0.0) || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Inverts a Hermitian positive-definite matrix, refusing when its condition
/// number exceeds `max_condition`. Returns the inverse and the condition.
pub fn invert_hermitian(k: &CMatrix, max_condition: f64) -> Result<(CMatrix, f64)> {
    if !k.is_square() || k.nrows() == 0 {
        return Err(Error::invalid(format!(
            "expected a non-empty square matrix, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    let condition = hermitian_condition(k);
    if !(condition <= max_condition) {
        return Err(Error::PrecodingSingular { condition });
    }
    let inv = k
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::PrecodingSingular { condition })?;
    Ok((inv, condition))
}

/// General square inverse via LU.
pub fn invert(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::invalid("cannot invert a non-square matrix"));
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::PrecodingSingular {
            condition: f64::INFINITY,
        })
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Real part of the trace.
pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Ratio of the second to the first singular value; 0 for a rank-1 matrix.
pub fn second_singular_ratio(m: &CMatrix) -> f64 {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    match sv.as_slice() {
        [] | [_] => 0.0,
        [first, second, ..] if *first > 0.0 => second / first,
        _ => 0.0,
    }
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}
