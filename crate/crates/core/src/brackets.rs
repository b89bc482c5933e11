//! Lagrange brackets, Poisson matrices and their structural validators.
//!
//! A first-order Lagrangian `L = ℓ_a(x) ẋ^a + ℓ₀(x)` on a `2n`-dimensional
//! phase space has Lagrange bracket `σ_ab = ∂_b ℓ_a − ∂_a ℓ_b`. The Poisson
//! matrix is fixed by `σ_ab J^bc = −δ_a^c`, and the flow is `ẋ = J ∇H` with
//! `H = −ℓ₀`. Stored one-forms are affine, so their brackets are constant;
//! state-dependent fields enter only through the finite-difference checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector, SINGULAR_CUTOFF};

/// Relative step for central differences, scaled by `1 + |x_c|`.
pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_FD_TOL: f64 = 1e-6;

/// Labeled coordinates of an even-dimensional phase space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseChart {
    labels: Vec<String>,
}

impl PhaseChart {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() || !labels.len().is_multiple_of(2) {
            return Err(Error::InvalidChart(format!(
                "dimension {} is not a positive even number",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidChart(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// Chart `q1..qn, <aux>1..<aux>n`.
    pub fn paired(n: usize, aux: &str) -> Self {
        let labels = (1..=n)
            .map(|i| format!("q{i}"))
            .chain((1..=n).map(|i| format!("{aux}{i}")))
            .collect();
        Self { labels }
    }

    /// Generic chart `x1..x{dim}`.
    pub fn generic(dim: usize) -> Result<Self> {
        Self::new((1..=dim).map(|i| format!("x{i}")))
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Number of degrees of freedom, half the phase-space dimension.
    pub fn dof(&self) -> usize {
        self.labels.len() / 2
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn check_square(&self, m: &Mat, what: &str) -> Result<()> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{what} is {}×{}, chart has dimension {}",
                m.nrows(),
                m.ncols(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_vector(&self, v: &Vector, what: &str) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{what} has length {}, chart has dimension {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Affine one-form `ℓ_a(x) = A_ab x^b + c_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineOneForm {
    pub chart: PhaseChart,
    pub a: Mat,
    pub c: Vector,
}

impl AffineOneForm {
    pub fn new(chart: PhaseChart, a: Mat, c: Vector) -> Result<Self> {
        chart.check_square(&a, "one-form matrix")?;
        chart.check_vector(&c, "one-form offset")?;
        Ok(Self { chart, a, c })
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        &self.a * x + &self.c
    }
}

/// Quadratic phase-space function `F(x) = ½xᵀQx + gᵀx + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticObservable {
    pub q: Mat,
    pub g: Vector,
    pub k: f64,
}

impl QuadraticObservable {
    pub fn new(q: Mat, g: Vector, k: f64) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() != g.len() {
            return Err(Error::ShapeMismatch(format!(
                "observable matrix {}×{} with gradient offset of length {}",
                q.nrows(),
                q.ncols(),
                g.len()
            )));
        }
        let defect = linalg::symmetry_defect(&q);
        if defect > 1e-12 {
            return Err(Error::SymmetryViolation { matrix: "observable Q", defect });
        }
        Ok(Self { q: linalg::symmetrize(&q), g, k })
    }

    pub fn quadratic(q: Mat) -> Result<Self> {
        let n = q.nrows();
        Self::new(q, Vector::zeros(n), 0.0)
    }

    /// The coordinate function `x^index`.
    pub fn coordinate(dim: usize, index: usize) -> Self {
        let mut g = Vector::zeros(dim);
        g[index] = 1.0;
        Self { q: Mat::zeros(dim, dim), g, k: 0.0 }
    }

    /// Linear function `kᵀx`.
    pub fn linear(direction: Vector) -> Self {
        let dim = direction.len();
        Self { q: Mat::zeros(dim, dim), g: direction, k: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.g.dot(x) + self.k
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.q * x + &self.g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangeBracket {
    pub chart: PhaseChart,
    pub sigma: Mat,
}

impl LagrangeBracket {
    pub fn new(chart: PhaseChart, sigma: Mat) -> Result<Self> {
        chart.check_square(&sigma, "Lagrange bracket")?;
        let defect = linalg::antisymmetry_defect(&sigma);
        if defect > 1e-12 {
            return Err(Error::SymmetryViolation { matrix: "sigma", defect });
        }
        Ok(Self { chart, sigma })
    }

    pub fn condition_number(&self) -> f64 {
        linalg::condition_number(&self.sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonMatrix {
    pub chart: PhaseChart,
    pub j: Mat,
}

impl PoissonMatrix {
    pub fn new(chart: PhaseChart, j: Mat) -> Result<Self> {
        chart.check_square(&j, "Poisson matrix")?;
        let defect = linalg::antisymmetry_defect(&j);
        if defect > 1e-12 {
            return Err(Error::SymmetryViolation { matrix: "J", defect });
        }
        Ok(Self { chart, j })
    }

    pub fn canonical(n: usize) -> Self {
        Self { chart: PhaseChart::paired(n, "p"), j: linalg::canonical_j(n) }
    }

    pub fn determinant(&self) -> f64 {
        self.j.clone().determinant()
    }

    pub fn condition_number(&self) -> f64 {
        linalg::condition_number(&self.j)
    }

    pub fn is_singular(&self) -> bool {
        linalg::singular_ratio(&self.j) < SINGULAR_CUTOFF
    }
}

/// `σ = A − Aᵀ`; the constant offset drops out of the curl.
pub fn sigma_from_oneform(ell: &AffineOneForm) -> LagrangeBracket {
    LagrangeBracket { chart: ell.chart.clone(), sigma: &ell.a - ell.a.transpose() }
}

/// `J = −σ⁻¹`, antisymmetrized after inversion.
pub fn invert_sigma(sigma: &LagrangeBracket) -> Result<PoissonMatrix> {
    let ratio = linalg::singular_ratio(&sigma.sigma);
    if ratio < SINGULAR_CUTOFF {
        return Err(Error::SingularSigma { ratio });
    }
    let inv = linalg::invert(&sigma.sigma).ok_or(Error::SingularSigma { ratio })?;
    Ok(PoissonMatrix { chart: sigma.chart.clone(), j: linalg::antisymmetrize(&(-inv)) })
}

/// `[F, G] = ∇Fᵀ J ∇G` at `x`.
pub fn poisson_bracket(
    f: &QuadraticObservable,
    g: &QuadraticObservable,
    j: &PoissonMatrix,
    x: &Vector,
) -> Result<f64> {
    let dim = j.chart.dim();
    if f.dim() != dim || g.dim() != dim || x.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "bracket of observables on dimensions {} and {} at a state of length {} with J of dimension {dim}",
            f.dim(),
            g.dim(),
            x.len()
        )));
    }
    Ok(f.gradient(x).dot(&(&j.j * g.gradient(x))))
}

/// Orthonormal basis of `ker J`; each `kᵀx` is conserved by every flow `ẋ = J∇H`.
pub fn casimir_basis(j: &PoissonMatrix, tol: f64) -> Vec<Vector> {
    let dim = j.chart.dim();
    let svd = j.j.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let max = svd.singular_values.max();
    if max == 0.0 {
        return (0..dim).map(|i| Vector::from_fn(dim, |r, _| if r == i { 1.0 } else { 0.0 })).collect();
    }
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < tol * max)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect()
}

/// Finite-difference settings for the structural checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifference {
    pub step: f64,
    pub tol: f64,
}

impl Default for FiniteDifference {
    fn default() -> Self {
        Self { step: DEFAULT_FD_STEP, tol: DEFAULT_FD_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub max_residual: f64,
    /// Index triple `(a, b, c)` and sample index of the worst residual.
    pub worst: Option<([usize; 3], usize)>,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiReport {
    pub max_residual: f64,
    pub worst: Option<([usize; 3], usize)>,
    pub tol: f64,
    pub passed: bool,
}

/// Central-difference derivatives of a matrix field: `out[c] = ∂_c F(x)`.
fn field_gradient<F>(field: &F, x: &Vector, dim: usize, step: f64) -> Result<Vec<Mat>>
where
    F: Fn(&Vector) -> Mat + ?Sized,
{
    (0..dim)
        .map(|c| {
            let h = step * (1.0 + x[c].abs());
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[c] += h;
            minus[c] -= h;
            let fp = eval_field(field, &plus, dim)?;
            let fm = eval_field(field, &minus, dim)?;
            Ok((fp - fm) / (2.0 * h))
        })
        .collect()
}

fn eval_field<F>(field: &F, x: &Vector, dim: usize) -> Result<Mat>
where
    F: Fn(&Vector) -> Mat + ?Sized,
{
    let m = field(x);
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::ShapeMismatch(format!(
            "field returned {}×{} at a state of dimension {dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix field".into()));
    }
    Ok(m)
}

fn check_points(points: &[Vector], step: f64) -> Result<usize> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step {step} must be positive")));
    }
    let dim = points.first().map(|p| p.len()).unwrap_or(0);
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::ShapeMismatch("sample points of differing dimension".into()));
    }
    Ok(dim)
}

/// `max |σ_ab,c + σ_bc,a + σ_ca,b|` over samples and index triples.
pub fn check_closure<F>(sigma_field: &F, points: &[Vector], fd: FiniteDifference) -> Result<ClosureReport>
where
    F: Fn(&Vector) -> Mat + ?Sized,
{
    let dim = check_points(points, fd.step)?;
    let mut max_residual = 0.0;
    let mut worst = None;
    for (p, x) in points.iter().enumerate() {
        let d = field_gradient(sigma_field, x, dim, fd.step)?;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let r = (d[c][(a, b)] + d[a][(b, c)] + d[b][(c, a)]).abs();
                    if r > max_residual || worst.is_none() {
                        max_residual = f64::max(max_residual, r);
                        worst = Some(([a, b, c], p));
                    }
                }
            }
        }
    }
    Ok(ClosureReport { max_residual, worst, tol: fd.tol, passed: max_residual <= fd.tol })
}

/// Cyclic Jacobi sum `J^{ab},_d J^{dc} + J^{bc},_d J^{da} + J^{ca},_d J^{db}`
/// for one triple at one point.
pub fn jacobi_cyclic_sum<F>(j_field: &F, x: &Vector, [a, b, c]: [usize; 3], step: f64) -> Result<f64>
where
    F: Fn(&Vector) -> Mat + ?Sized,
{
    let dim = check_points(std::slice::from_ref(x), step)?;
    let d = field_gradient(j_field, x, dim, step)?;
    let j = eval_field(j_field, x, dim)?;
    Ok(jacobi_term(&d, &j, a, b, c))
}

fn jacobi_term(d: &[Mat], j: &Mat, a: usize, b: usize, c: usize) -> f64 {
    let dim = j.nrows();
    (0..dim)
        .map(|k| d[k][(a, b)] * j[(k, c)] + d[k][(b, c)] * j[(k, a)] + d[k][(c, a)] * j[(k, b)])
        .sum()
}

pub fn check_jacobi<F>(j_field: &F, points: &[Vector], fd: FiniteDifference) -> Result<JacobiReport>
where
    F: Fn(&Vector) -> Mat + ?Sized,
{
    let dim = check_points(points, fd.step)?;
    let mut max_residual = 0.0;
    let mut worst = None;
    for (p, x) in points.iter().enumerate() {
        let d = field_gradient(j_field, x, dim, fd.step)?;
        let j = eval_field(j_field, x, dim)?;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let r = jacobi_term(&d, &j, a, b, c).abs();
                    if r > max_residual || worst.is_none() {
                        max_residual = f64::max(max_residual, r);
                        worst = Some(([a, b, c], p));
                    }
                }
            }
        }
    }
    Ok(JacobiReport { max_residual, worst, tol: fd.tol, passed: max_residual <= fd.tol })
}

/// Jacobi check of a constant Poisson matrix, sampled at the origin and a unit point.
pub fn check_jacobi_constant(j: &PoissonMatrix, fd: FiniteDifference) -> Result<JacobiReport> {
    let dim = j.chart.dim();
    let points = [Vector::zeros(dim), Vector::repeat(dim, 1.0)];
    let m = j.j.clone();
    check_jacobi(&move |_: &Vector| m.clone(), &points, fd)
}

pub fn check_closure_constant(sigma: &LagrangeBracket, fd: FiniteDifference) -> Result<ClosureReport> {
    let dim = sigma.chart.dim();
    let points = [Vector::zeros(dim), Vector::repeat(dim, 1.0)];
    let m = sigma.sigma.clone();
    check_closure(&move |_: &Vector| m.clone(), &points, fd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{blocks, canonical_j, epsilon2};
    use proptest::prelude::*;

    fn chart(dim: usize) -> PhaseChart {
        PhaseChart::generic(dim).unwrap()
    }

    /// Numerical curl of an arbitrary one-form field, independent of `A − Aᵀ`.
    fn fd_curl(ell: &dyn Fn(&Vector) -> Vector, x: &Vector) -> Mat {
        let dim = x.len();
        let h = 1e-4;
        let mut grad = Mat::zeros(dim, dim); // grad[(a, b)] = ∂_b ℓ_a
        for b in 0..dim {
            let mut p = x.clone();
            let mut m = x.clone();
            p[b] += h;
            m[b] -= h;
            let col = (ell(&p) - ell(&m)) / (2.0 * h);
            grad.set_column(b, &col);
        }
        &grad - grad.transpose()
    }

    #[test]
    fn chart_validation() {
        assert!(PhaseChart::new(["q"]).is_err());
        assert!(PhaseChart::new(["q", "q"]).is_err());
        assert!(PhaseChart::new(Vec::<String>::new()).is_err());
        let c = PhaseChart::paired(2, "u");
        assert_eq!(c.labels(), ["q1", "q2", "u1", "u2"]);
        assert_eq!(c.dof(), 2);
    }

    #[test]
    fn sigma_of_p_dq() {
        // ℓ = p dq on x = (q, p): ℓ_q = p, ℓ_p = 0.
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let ell = AffineOneForm::new(chart(2), a.clone(), Vector::zeros(2)).unwrap();
        let s = sigma_from_oneform(&ell);
        let oracle = fd_curl(&|x: &Vector| &a * x, &Vector::from_vec(vec![0.3, -0.2]));
        assert!(linalg::max_abs(&(&s.sigma - &oracle)) < 1e-10);
        assert_eq!(s.sigma, Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        // its Poisson matrix is the canonical one
        let j = invert_sigma(&s).unwrap();
        assert_eq!(j.j, canonical_j(1));
    }

    #[test]
    fn transposed_toy_oneform_matches_fd_curl() {
        // The toy form A = [[0,0],[1,0]] encodes ℓ_1 = 0, ℓ_2 = x¹.
        let a = Mat::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let ell = AffineOneForm::new(chart(2), a.clone(), Vector::from_vec(vec![3.0, 4.0])).unwrap();
        let s = sigma_from_oneform(&ell);
        let oracle = fd_curl(&|x: &Vector| &a * x, &Vector::from_vec(vec![1.0, 2.0]));
        assert!(linalg::max_abs(&(&s.sigma - &oracle)) < 1e-10);
        assert_eq!(s.sigma, Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn symmetric_oneform_has_zero_sigma() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -3.0]);
        let ell = AffineOneForm::new(chart(2), a, Vector::zeros(2)).unwrap();
        assert_eq!(sigma_from_oneform(&ell).sigma, Mat::zeros(2, 2));
    }

    #[test]
    fn invert_sigma_canonical_and_singular() {
        let s = LagrangeBracket::new(chart(4), canonical_j(2)).unwrap();
        let j = invert_sigma(&s).unwrap();
        assert_eq!(j.j, canonical_j(2));
        let zero = LagrangeBracket::new(chart(4), Mat::zeros(4, 4)).unwrap();
        assert!(matches!(invert_sigma(&zero), Err(Error::SingularSigma { .. })));
    }

    #[test]
    fn invert_sigma_gyroscopic_block() {
        let t = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let theta = epsilon2() * 0.7;
        let sigma = blocks(&theta, &t, &(-&t), &Mat::zeros(2, 2));
        let j = invert_sigma(&LagrangeBracket::new(chart(4), sigma.clone()).unwrap()).unwrap();
        let ti = t.clone().try_inverse().unwrap();
        let expected = blocks(&Mat::zeros(2, 2), &ti, &(-&ti), &(-(&ti * &theta * &ti)));
        assert!(linalg::max_abs(&(&j.j - expected)) < 1e-14);
        assert!(linalg::inf_norm(&(&sigma * &j.j + Mat::identity(4, 4))) < 1e-14);
    }

    #[test]
    fn closure_constant_is_exactly_zero() {
        let s = LagrangeBracket::new(chart(4), canonical_j(2)).unwrap();
        let r = check_closure_constant(&s, FiniteDifference::default()).unwrap();
        assert_eq!(r.max_residual, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn closure_detects_non_closed_field() {
        let field = |x: &Vector| {
            let mut m = Mat::zeros(6, 6);
            m[(0, 1)] = x[2];
            m[(1, 0)] = -x[2];
            m
        };
        let pts = vec![Vector::zeros(6), Vector::from_fn(6, |i, _| i as f64 * 0.3)];
        let r = check_closure(&field, &pts, FiniteDifference::default()).unwrap();
        // analytic cyclic sum for (a,b,c) = (1,2,3) is ∂₃σ₁₂ = 1
        assert!((r.max_residual - 1.0).abs() < 1e-8, "{}", r.max_residual);
        assert!(!r.passed);
    }

    #[test]
    fn closure_rejects_bad_step_and_non_finite() {
        let field = |_: &Vector| Mat::zeros(2, 2);
        let pts = vec![Vector::zeros(2)];
        let bad = FiniteDifference { step: 0.0, tol: 1e-6 };
        assert!(check_closure(&field, &pts, bad).is_err());
        let nan = |_: &Vector| Mat::from_element(2, 2, f64::NAN);
        assert!(matches!(
            check_closure(&nan, &pts, FiniteDifference::default()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn jacobi_detects_linear_deformation() {
        // canonical J on 4 dims with J^{12} = x¹
        let field = |x: &Vector| {
            let mut m = canonical_j(2);
            m[(0, 1)] = x[0];
            m[(1, 0)] = -x[0];
            m
        };
        let x = Vector::from_vec(vec![0.4, -1.0, 0.2, 0.7]);
        // symbolic: only ∂₁J^{12} = 1 survives, giving J^{13} = 1 for the triple (1,2,3)
        let s = jacobi_cyclic_sum(&field, &x, [0, 1, 2], DEFAULT_FD_STEP).unwrap();
        assert!((s - 1.0).abs() < 1e-8, "{s}");
        let r = check_jacobi(&field, &[x], FiniteDifference::default()).unwrap();
        assert!(!r.passed);
        assert!(r.max_residual >= 1.0 - 1e-8);
    }

    #[test]
    fn jacobi_constant_is_exactly_zero() {
        let t = Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]);
        let ti = t.try_inverse().unwrap();
        let j = blocks(&Mat::zeros(2, 2), &ti, &(-&ti), &(-(&ti * epsilon2() * &ti)));
        let pm = PoissonMatrix::new(chart(4), j).unwrap();
        let r = check_jacobi_constant(&pm, FiniteDifference::default()).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn canonical_pair_bracket() {
        let j = PoissonMatrix::canonical(2);
        let f = QuadraticObservable::coordinate(4, 0);
        let g = QuadraticObservable::coordinate(4, 2);
        let x = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(poisson_bracket(&f, &g, &j, &x).unwrap(), 1.0);
        assert_eq!(poisson_bracket(&f, &f, &j, &x).unwrap(), 0.0);
        let short = QuadraticObservable::coordinate(2, 0);
        assert!(poisson_bracket(&short, &g, &j, &x).is_err());
    }

    #[test]
    fn casimirs() {
        assert!(casimir_basis(&PoissonMatrix::canonical(2), 1e-12).is_empty());
        let mut j = Mat::zeros(4, 4);
        j[(0, 1)] = 1.0;
        j[(1, 0)] = -1.0;
        let pm = PoissonMatrix::new(chart(4), j.clone()).unwrap();
        let basis = casimir_basis(&pm, 1e-12);
        assert_eq!(basis.len(), 2);
        for k in &basis {
            assert!(k[0].abs() < 1e-15 && k[1].abs() < 1e-15);
            assert!((&j * k).norm() < 1e-15);
        }
        // θB = 1 noncommutative matrix
        let e = epsilon2();
        let i2 = Mat::identity(2, 2);
        let jnc = PoissonMatrix::new(chart(4), blocks(&e, &i2, &(-&i2), &e)).unwrap();
        let basis = casimir_basis(&jnc, 1e-12);
        assert_eq!(basis.len(), 2);
        for k in &basis {
            assert!((&jnc.j * k).norm() < 10.0 * 1e-12 * jnc.j.norm());
        }
    }

    fn antisym(n: usize, vals: &[f64]) -> Mat {
        let mut m = Mat::zeros(n, n);
        let mut it = vals.iter();
        for i in 0..n {
            for k in (i + 1)..n {
                let v = *it.next().unwrap();
                m[(i, k)] = v;
                m[(k, i)] = -v;
            }
        }
        m
    }

    proptest! {
        #[test]
        fn sigma_is_exactly_antisymmetric(vals in prop::collection::vec(-1.0f64..1.0, 36)) {
            let a = Mat::from_row_slice(6, 6, &vals);
            let ell = AffineOneForm::new(chart(6), a, Vector::zeros(6)).unwrap();
            let s = sigma_from_oneform(&ell).sigma;
            prop_assert_eq!(&s, &(-s.transpose()));
        }

        #[test]
        fn bracket_is_antisymmetric(
            qa in prop::collection::vec(-1.0f64..1.0, 16),
            qb in prop::collection::vec(-1.0f64..1.0, 16),
            ga in prop::collection::vec(-1.0f64..1.0, 4),
            gb in prop::collection::vec(-1.0f64..1.0, 4),
            jv in prop::collection::vec(-1.0f64..1.0, 6),
            xv in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let sym = |v: &[f64]| linalg::symmetrize(&Mat::from_row_slice(4, 4, v));
            let f = QuadraticObservable::new(sym(&qa), Vector::from_vec(ga), 0.1).unwrap();
            let g = QuadraticObservable::new(sym(&qb), Vector::from_vec(gb), -0.3).unwrap();
            let j = PoissonMatrix::new(chart(4), antisym(4, &jv)).unwrap();
            let x = Vector::from_vec(xv);
            let fg = poisson_bracket(&f, &g, &j, &x).unwrap();
            let gf = poisson_bracket(&g, &f, &j, &x).unwrap();
            prop_assert!((fg + gf).abs() <= 1e-13 * (1.0 + fg.abs()));
        }

        #[test]
        fn casimirs_are_annihilated(jv in prop::collection::vec(-1.0f64..1.0, 6), zero_row in 0usize..4) {
            // force a kernel by zeroing one row/column of a 4×4 antisymmetric matrix
            let mut m = antisym(4, &jv);
            for k in 0..4 {
                m[(zero_row, k)] = 0.0;
                m[(k, zero_row)] = 0.0;
            }
            let j = PoissonMatrix::new(chart(4), m).unwrap();
            let tol = 1e-12;
            let basis = casimir_basis(&j, tol);
            prop_assert!(!basis.is_empty());
            for k in &basis {
                prop_assert!((&j.j * k).norm() < 10.0 * tol * j.j.norm().max(1e-300) + 1e-15);
            }
        }
    }
}
