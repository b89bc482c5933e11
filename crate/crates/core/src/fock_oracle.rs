//! Brute-force spectra: bring the brackets to canonical form, write the
//! Hamiltonian in ladder operators and diagonalize it on a truncated
//! number basis. Independent of the normal-mode route in [`crate::spectra`].

use faer::{Mat as CMat, Side};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::HamiltonianStructure;
use crate::linalg::{self, Mat, Vector, SINGULAR_CUTOFF};

pub const DEFAULT_CUTOFF: usize = 30;
pub const MIN_CUTOFF: usize = 4;
/// Extra quanta per mode used for the convergence certificate.
pub const CERTIFICATE_STEP: usize = 5;
pub const CONVERGENCE_TOL: f64 = 1e-8;
const CANONICAL_TOL: f64 = 1e-10;

/// `S` with `S·J·Sᵀ = J₀`; `y = S x` has canonical brackets `(x₁..xₙ, p₁..pₙ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Canonicalization {
    pub s: Mat,
    /// Singular values of `J`, one per canonical pair.
    pub kappas: Vec<f64>,
    pub residual: f64,
}

pub fn canonicalize(j: &Mat) -> Result<Canonicalization> {
    let dim = j.nrows();
    if dim == 0 || !dim.is_multiple_of(2) || j.ncols() != dim {
        return Err(Error::ShapeMismatch(format!("Poisson matrix is {}x{}", dim, j.ncols())));
    }
    let ratio = linalg::singular_ratio(j);
    if ratio < SINGULAR_CUTOFF {
        return Err(Error::SingularPoissonMatrix { ratio });
    }
    let j = linalg::antisymmetrize(j);
    let n = dim / 2;
    let eig = SymmetricEigen::new(j.transpose() * &j);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut chosen: Vec<Vector> = Vec::with_capacity(dim);
    let mut s = Mat::zeros(dim, dim);
    let mut kappas = Vec::with_capacity(n);
    for &idx in &order {
        if kappas.len() == n {
            break;
        }
        let mut e: Vector = eig.eigenvectors.column(idx).into_owned();
        for _ in 0..2 {
            for c in &chosen {
                let proj = c.dot(&e);
                e -= c * proj;
            }
        }
        let norm = e.norm();
        if norm < 0.5 {
            continue;
        }
        e /= norm;
        let je = &j * &e;
        let kappa = je.norm();
        let f = -je / kappa;
        let k = kappas.len();
        let scale = kappa.sqrt().recip();
        s.row_mut(k).copy_from(&(e.transpose() * scale));
        s.row_mut(n + k).copy_from(&(f.transpose() * scale));
        chosen.push(e);
        chosen.push(f);
        kappas.push(kappa);
    }
    if kappas.len() != n {
        return Err(Error::SingularPoissonMatrix { ratio });
    }
    let j0 = linalg::canonical_j(n);
    let residual = linalg::max_abs(&(&s * &j * s.transpose() - &j0));
    if !(residual < CANONICAL_TOL) {
        return Err(Error::NonFinite(format!("canonical frame residual {residual:.3e}")));
    }
    Ok(Canonicalization { s, kappas, residual })
}

/// Normal-ordered Hamiltonian `Σ P_ij a_i a_j + h.c. + Σ R_ij a_i† a_j + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderForm {
    pub modes: usize,
    /// Coefficients of `a_i a_j`; the `a_i† a_j†` coefficients are the conjugates.
    pub pair: Vec<Vec<Complex64>>,
    /// Coefficients of `a_i† a_j`, Hermitian.
    pub hop: Vec<Vec<Complex64>>,
    pub constant: f64,
}

/// Ladder-operator form of `H = ½ yᵀ M' y` in canonical coordinates.
pub fn ladder_form(m_canonical: &Mat) -> LadderForm {
    let dim = m_canonical.nrows();
    let n = dim / 2;
    // y = L a + conj(L) a†, x_k = (a_k + a_k†)/√2, p_k = i(a_k† − a_k)/√2
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut l = vec![vec![Complex64::new(0.0, 0.0); n]; dim];
    for k in 0..n {
        l[k][k] = Complex64::new(r, 0.0);
        l[n + k][k] = Complex64::new(0.0, -r);
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut pair = vec![vec![zero; n]; n];
    let mut hop = vec![vec![zero; n]; n];
    let mut constant = zero;
    for a in 0..dim {
        for b in 0..dim {
            let mab = m_canonical[(a, b)];
            if mab == 0.0 {
                continue;
            }
            for i in 0..n {
                constant += 0.5 * mab * l[a][i] * l[b][i].conj();
                for j in 0..n {
                    pair[i][j] += 0.5 * mab * l[a][i] * l[b][j];
                    hop[i][j] += 0.5 * mab * (l[a][i].conj() * l[b][j] + l[a][j] * l[b][i].conj());
                }
            }
        }
    }
    LadderForm { modes: n, pair, hop, constant: constant.re }
}

/// Hamiltonian restricted to `n_k < cutoff` for every mode.
pub struct TruncatedOperator {
    pub cutoff: usize,
    pub modes: usize,
    pub matrix: CMat<Complex64>,
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.matrix
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::NonFinite(format!("Hermitian eigensolver failed: {e:?}")))
    }
}

fn occupations(mut index: usize, cutoff: usize, modes: usize) -> Vec<usize> {
    let mut n = vec![0; modes];
    for slot in n.iter_mut() {
        *slot = index % cutoff;
        index /= cutoff;
    }
    n
}

fn state_index(n: &[usize], cutoff: usize) -> usize {
    n.iter().rev().fold(0, |acc, &k| acc * cutoff + k)
}

pub fn truncate(form: &LadderForm, cutoff: usize) -> Result<TruncatedOperator> {
    if cutoff < MIN_CUTOFF {
        return Err(Error::CutoffTooSmall(cutoff));
    }
    let modes = form.modes;
    let dim = cutoff
        .checked_pow(modes as u32)
        .filter(|&d| d <= 1 << 14)
        .ok_or_else(|| Error::InvalidParameter(format!("basis {cutoff}^{modes} is too large")))?;
    let mut h = CMat::<Complex64>::zeros(dim, dim);
    for s in 0..dim {
        let n = occupations(s, cutoff, modes);
        h[(s, s)] += Complex64::new(form.constant, 0.0);
        // a_i† a_j
        for i in 0..modes {
            for j in 0..modes {
                if n[j] == 0 {
                    continue;
                }
                let mut t = n.clone();
                let mut amp = (t[j] as f64).sqrt();
                t[j] -= 1;
                t[i] += 1;
                if t[i] >= cutoff {
                    continue;
                }
                amp *= (t[i] as f64).sqrt();
                h[(state_index(&t, cutoff), s)] += form.hop[i][j] * amp;
            }
        }
        // a_i a_j and its adjoint
        for i in 0..modes {
            for j in 0..modes {
                let mut t = n.clone();
                if t[j] == 0 {
                    continue;
                }
                let mut amp = (t[j] as f64).sqrt();
                t[j] -= 1;
                if t[i] == 0 {
                    continue;
                }
                amp *= (t[i] as f64).sqrt();
                t[i] -= 1;
                let target = state_index(&t, cutoff);
                let v = form.pair[i][j] * amp;
                h[(target, s)] += v;
                h[(s, target)] += v.conj();
            }
        }
    }
    Ok(TruncatedOperator { cutoff, modes, matrix: h })
}

/// Canonical-frame Hamiltonian matrix `S⁻ᵀ M S⁻¹`.
pub fn canonical_hamiltonian(structure: &HamiltonianStructure) -> Result<(Canonicalization, Mat)> {
    let frame = canonicalize(structure.j())?;
    let s_inv = linalg::invert(&frame.s).ok_or(Error::SingularPoissonMatrix { ratio: 0.0 })?;
    let m = linalg::symmetrize(&(s_inv.transpose() * &structure.m * &s_inv));
    Ok((frame, m))
}

pub fn fock_hamiltonian(structure: &HamiltonianStructure, cutoff: usize) -> Result<TruncatedOperator> {
    let (_, m) = canonical_hamiltonian(structure)?;
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x.abs())));
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio > SINGULAR_CUTOFF) {
        return Err(Error::NotPositiveDefinite { ratio });
    }
    truncate(&ladder_form(&m), cutoff)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpectrum {
    /// Lowest `k` eigenvalues, ascending, with multiplicity.
    pub levels: Vec<f64>,
    pub cutoff: usize,
    pub basis_dim: usize,
    /// Largest shift of the reported levels when the cutoff grows by [`CERTIFICATE_STEP`].
    pub certificate: f64,
}

/// Lowest `k` levels with a convergence certificate; fails if the certificate exceeds `1e-8`.
pub fn oracle_spectrum(structure: &HamiltonianStructure, cutoff: usize, k: usize) -> Result<OracleSpectrum> {
    let coarse = fock_hamiltonian(structure, cutoff)?;
    let fine = fock_hamiltonian(structure, cutoff + CERTIFICATE_STEP)?;
    let a = coarse.eigenvalues()?;
    let b = fine.eigenvalues()?;
    let k = k.min(a.len());
    let certificate = (0..k).map(|i| (a[i] - b[i]).abs() / b[i].abs().max(1.0)).fold(0.0, f64::max);
    if !(certificate < CONVERGENCE_TOL) {
        return Err(Error::NoConvergence { shift: certificate, cutoff, next: cutoff + CERTIFICATE_STEP });
    }
    Ok(OracleSpectrum {
        levels: b[..k].iter().map(|e| e + structure.offset).collect(),
        cutoff,
        basis_dim: coarse.dim(),
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brackets::PoissonMatrix;
    use crate::lagrangian::{build_structure_nc, Provenance};
    use crate::linalg::canonical_j;

    fn structure(j: Mat, m: Mat) -> HamiltonianStructure {
        HamiltonianStructure::new(PoissonMatrix::new(crate::brackets::PhaseChart::generic(j.nrows()).unwrap(), j).unwrap(), m, Provenance::Custom).unwrap()
    }

    #[test]
    fn canonicalize_nc_matrix() {
        let s = build_structure_nc(1.0, 0.3, -0.7);
        let c = canonicalize(s.j()).unwrap();
        assert!(c.residual < 1e-13);
        assert!((c.kappas.iter().product::<f64>().powi(2) - s.poisson.determinant()).abs() < 1e-12);
    }

    #[test]
    fn canonicalize_rejects_singular_and_odd() {
        assert!(matches!(canonicalize(build_structure_nc(1.0, 1.0, 1.0).j()), Err(Error::SingularPoissonMatrix { .. })));
        assert!(canonicalize(&Mat::zeros(3, 3)).is_err());
    }

    #[test]
    fn ladder_form_of_oscillator() {
        // ½(p² + x²) = a†a + ½
        let f = ladder_form(&Mat::identity(2, 2));
        assert!(f.pair[0][0].norm() < 1e-15);
        assert!((f.hop[0][0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((f.constant - 0.5).abs() < 1e-15);
        // ½x² = ¼(a² + a†² + 2a†a + 1)
        let f = ladder_form(&Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert!((f.pair[0][0] - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert!((f.hop[0][0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((f.constant - 0.25).abs() < 1e-15);
    }

    #[test]
    fn squeezed_oscillator_spectrum() {
        // ½(p²/m + k x²) has ω = sqrt(k/m); the ladder basis is not adapted to it
        let m = Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.25]);
        let s = structure(canonical_j(1), m);
        let o = oracle_spectrum(&s, 80, 5).unwrap();
        for (i, e) in o.levels.iter().enumerate() {
            assert!((e - (i as f64 + 0.5)).abs() < 1e-9, "{i}: {e}");
        }
    }

    #[test]
    fn truncation_bounds_from_above() {
        let m = Mat::from_row_slice(2, 2, &[9.0, 0.0, 0.0, 1.0 / 9.0]);
        let s = structure(canonical_j(1), m);
        for cutoff in [6, 10, 16] {
            let e = fock_hamiltonian(&s, cutoff).unwrap().eigenvalues().unwrap();
            assert!(e[0] >= 0.5 - 1e-12);
        }
    }

    #[test]
    fn cutoff_and_definiteness_checks() {
        let s = structure(canonical_j(1), Mat::identity(2, 2));
        assert!(matches!(oracle_spectrum(&s, 3, 2), Err(Error::CutoffTooSmall(3))));
        let bad = structure(canonical_j(1), Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
        assert!(matches!(fock_hamiltonian(&bad, 10), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn unconverged_cutoff_is_reported() {
        let m = Mat::from_row_slice(2, 2, &[400.0, 0.0, 0.0, 1.0 / 400.0]);
        let s = structure(canonical_j(1), m);
        assert!(matches!(oracle_spectrum(&s, 6, 3), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn index_round_trip() {
        for i in 0..125 {
            assert_eq!(state_index(&occupations(i, 5, 3), 5), i);
        }
    }
}
