//! Small dense helpers shared by the structure builders and validators.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular value cutoff used for every invertibility decision.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

/// The 2×2 Levi-Civita symbol with ε₁₂ = +1.
pub fn epsilon2() -> Mat {
    Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// Standard canonical Poisson matrix `[[0, I], [-I, 0]]` on a `2n` chart.
pub fn canonical_j(n: usize) -> Mat {
    let mut j = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Assembles `[[a, b], [c, d]]` from four `n×n` blocks.
pub fn blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let n = a.nrows();
    let mut out = Mat::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, n)).copy_from(b);
    out.view_mut((n, 0), (n, n)).copy_from(c);
    out.view_mut((n, n), (n, n)).copy_from(d);
    out
}

pub fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn rel_defect(diff: &Mat, reference: &Mat) -> f64 {
    let scale = max_abs(reference);
    if scale == 0.0 {
        0.0
    } else {
        max_abs(diff) / scale
    }
}

/// `max|A - Aᵀ| / max|A|`, zero for the zero matrix.
pub fn symmetry_defect(m: &Mat) -> f64 {
    rel_defect(&(m - m.transpose()), m)
}

/// `max|A + Aᵀ| / max|A|`, zero for the zero matrix.
pub fn antisymmetry_defect(m: &Mat) -> f64 {
    rel_defect(&(m + m.transpose()), m)
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn antisymmetrize(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Ratio of smallest to largest singular value; zero for the zero matrix.
pub fn singular_ratio(m: &Mat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if max > 0.0 => min / max,
        _ => 0.0,
    }
}

pub fn condition_number(m: &Mat) -> f64 {
    let r = singular_ratio(m);
    if r == 0.0 {
        f64::INFINITY
    } else {
        1.0 / r
    }
}

/// Number of singular values below `rel_tol` times the largest one.
pub fn nullity(m: &Mat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let max = s.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return m.ncols();
    }
    s.iter().filter(|&&x| x < rel_tol * max).count()
}

/// Inverse through LU with one step of residual refinement.
pub fn invert(m: &Mat) -> Option<Mat> {
    let lu = m.clone().lu();
    let mut x = lu.try_inverse()?;
    let id = Mat::identity(m.nrows(), m.ncols());
    let r = &id - m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Some(x)
}

/// Matrix exponential by scaling and squaring of a Taylor series.
///
/// The argument is scaled to `‖A/2^s‖₁ ≤ 1/2`, where the series tail after
/// 20 terms is below `0.5^21 / 21! ≈ 2e-26`.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm1 = a
        .column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut result = Mat::identity(n, n);
    let mut term = Mat::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
        if max_abs(&term) <= 1e-18 * max_abs(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.7;
        let a = epsilon2() * t;
        let e = expm(&a);
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-15);
        assert!((e[(0, 1)] - t.sin()).abs() < 1e-15);
        assert!((e[(1, 0)] + t.sin()).abs() < 1e-15);
    }

    #[test]
    fn expm_of_nilpotent_is_polynomial() {
        let a = Mat::from_row_slice(2, 2, &[0.0, 3.0, 0.0, 0.0]);
        let e = expm(&a);
        assert_eq!(e[(0, 1)], 3.0);
        assert_eq!(e[(1, 0)], 0.0);
    }

    #[test]
    fn expm_large_argument_periodicity() {
        let a = canonical_j(2) * (2.0 * std::f64::consts::PI * 7.0);
        let e = expm(&a);
        assert!(max_abs(&(e - Mat::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn nullity_counts_zero_directions() {
        let mut m = Mat::zeros(4, 4);
        m[(0, 2)] = 1.0;
        m[(2, 0)] = -1.0;
        assert_eq!(nullity(&m, 1e-12), 2);
        assert_eq!(nullity(&Mat::zeros(3, 3), 1e-12), 3);
    }

    #[test]
    fn defects() {
        let e = epsilon2();
        assert_eq!(antisymmetry_defect(&e), 0.0);
        assert_eq!(symmetry_defect(&e), 2.0);
        assert_eq!(symmetry_defect(&Mat::zeros(2, 2)), 0.0);
    }
}
