//! The second-order model `T q̈ − Θ q̇ + V q = 0` and its first-order presentations.
//!
//! Three charts are provided, each behind the [`ChartBuilder`] trait and
//! selectable by name through [`chart_builder`]:
//!
//! * `qu`: velocities `u = q̇` as auxiliary variables, noncanonical `[u, u]`.
//! * `qp`: canonical momenta `p = T q̇ − ½Θq`.
//! * `qv`: `v = T q̇ − Θq`, noncommuting coordinates; only when `V = T`.

use serde::{Deserialize, Serialize};

use crate::brackets::{
    invert_sigma, sigma_from_oneform, AffineOneForm, PhaseChart, PoissonMatrix, QuadraticObservable,
};
use crate::error::{Error, Result};
use crate::linalg::{self, blocks, Mat, Vector, SINGULAR_CUTOFF};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModel {
    pub t: Mat,
    pub theta: Mat,
    pub v: Mat,
}

/// Validates `T = Tᵀ`, `Θ = −Θᵀ`, `V = Vᵀ`.
pub fn build_model(t: Mat, theta: Mat, v: Mat) -> Result<QuadraticModel> {
    let n = t.nrows();
    for (name, m) in [("T", &t), ("Theta", &theta), ("V", &v)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "{name} is {}×{}, expected {n}×{n}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    if n == 0 {
        return Err(Error::ShapeMismatch("model needs at least one coordinate".into()));
    }
    let checks = [
        ("T", linalg::symmetry_defect(&t)),
        ("Theta", linalg::antisymmetry_defect(&theta)),
        ("V", linalg::symmetry_defect(&v)),
    ];
    for (matrix, defect) in checks {
        if defect > SYMMETRY_TOL {
            return Err(Error::SymmetryViolation { matrix, defect });
        }
    }
    Ok(QuadraticModel {
        t: linalg::symmetrize(&t),
        theta: linalg::antisymmetrize(&theta),
        v: linalg::symmetrize(&v),
    })
}

impl QuadraticModel {
    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    /// Planar charged particle: `T = m I₂`, `Θ = eB ε`, `V = 0`.
    pub fn landau(m: f64, e: f64, b: f64) -> Result<Self> {
        build_model(Mat::identity(2, 2) * m, linalg::epsilon2() * (e * b), Mat::zeros(2, 2))
    }

    /// Oscillator equations `q̈ = (B + θω²) ε q̇ − (1 − Bθ) ω² q`.
    pub fn nc_oscillator(omega: f64, theta: f64, b: f64) -> Result<Self> {
        build_model(
            Mat::identity(2, 2),
            linalg::epsilon2() * (b + theta * omega * omega),
            Mat::identity(2, 2) * ((1.0 - b * theta) * omega * omega),
        )
    }

    pub fn t_inverse(&self) -> Result<Mat> {
        let ratio = linalg::singular_ratio(&self.t);
        if ratio < SINGULAR_CUTOFF {
            return Err(Error::SingularT { ratio });
        }
        linalg::invert(&self.t).map(|m| linalg::symmetrize(&m)).ok_or(Error::SingularT { ratio })
    }

    /// `max|V − T| / max|T|`.
    pub fn v_minus_t_defect(&self) -> f64 {
        let scale = linalg::max_abs(&self.t).max(f64::MIN_POSITIVE);
        linalg::max_abs(&(&self.v - &self.t)) / scale
    }

    fn require_v_equals_t(&self) -> Result<()> {
        let defect = self.v_minus_t_defect();
        if defect > SYMMETRY_TOL {
            return Err(Error::RequiresVEqualsT { defect });
        }
        Ok(())
    }

    fn check_len(&self, v: &Vector, what: &str) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::ShapeMismatch(format!("{what} has length {}, model has n = {}", v.len(), self.n())));
        }
        Ok(())
    }
}

/// `T q̈ − Θ q̇ + V q`; zero exactly on solutions.
pub fn second_order_residual(model: &QuadraticModel, q: &Vector, qdot: &Vector, qddot: &Vector) -> Vector {
    &model.t * qddot - &model.theta * qdot + &model.v * q
}

/// `p = T q̇ − ½Θq`.
pub fn momentum_map(model: &QuadraticModel, q: &Vector, qdot: &Vector) -> Result<Vector> {
    model.check_len(q, "q")?;
    model.check_len(qdot, "qdot")?;
    model.t_inverse()?;
    Ok(&model.t * qdot - &model.theta * q * 0.5)
}

/// `q̇ = T⁻¹(p + ½Θq)`.
pub fn velocity_map(model: &QuadraticModel, q: &Vector, p: &Vector) -> Result<Vector> {
    model.check_len(q, "q")?;
    model.check_len(p, "p")?;
    Ok(model.t_inverse()? * (p + &model.theta * q * 0.5))
}

/// `v = T q̇ − Θq`, the auxiliary variable of the `{q,v}` chart.
pub fn v_map(model: &QuadraticModel, q: &Vector, qdot: &Vector) -> Result<Vector> {
    model.check_len(q, "q")?;
    model.check_len(qdot, "qdot")?;
    model.require_v_equals_t()?;
    model.t_inverse()?;
    Ok(&model.t * qdot - &model.theta * q)
}

/// Which presentation a structure came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Qu,
    Qp,
    Qv,
    Custom,
}

/// Constant Poisson matrix `J` with quadratic Hamiltonian `H = ½xᵀMx + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianStructure {
    pub poisson: PoissonMatrix,
    pub m: Mat,
    /// Constant energy shift, e.g. the `p₃²/2m` of the planar Landau reduction.
    #[serde(default)]
    pub offset: f64,
    pub provenance: Provenance,
}

impl HamiltonianStructure {
    pub fn new(poisson: PoissonMatrix, m: Mat, provenance: Provenance) -> Result<Self> {
        let dim = poisson.chart.dim();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::ShapeMismatch(format!("Hamiltonian matrix is {}×{}, chart has dimension {dim}", m.nrows(), m.ncols())));
        }
        let defect = linalg::symmetry_defect(&m);
        if defect > SYMMETRY_TOL {
            return Err(Error::SymmetryViolation { matrix: "M", defect });
        }
        Ok(Self { poisson, m: linalg::symmetrize(&m), offset: 0.0, provenance })
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn chart(&self) -> &PhaseChart {
        &self.poisson.chart
    }

    pub fn j(&self) -> &Mat {
        &self.poisson.j
    }

    pub fn dim(&self) -> usize {
        self.poisson.chart.dim()
    }

    pub fn energy(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.m * x)) + self.offset
    }

    pub fn hamiltonian(&self) -> QuadraticObservable {
        QuadraticObservable { q: self.m.clone(), g: Vector::zeros(self.dim()), k: self.offset }
    }

    /// `J ∇H` at `x`.
    pub fn vector_field(&self, x: &Vector) -> Vector {
        self.j() * (&self.m * x)
    }
}

/// `L = ℓ_a(x) ẋ^a + ℓ₀(x)` with affine `ℓ_a` and `H = −ℓ₀` quadratic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderLagrangian {
    pub oneform: AffineOneForm,
    pub hamiltonian: QuadraticObservable,
}

impl FirstOrderLagrangian {
    /// Structure obtained by curl, inversion and `H = −ℓ₀`.
    pub fn to_structure(&self, provenance: Provenance) -> Result<HamiltonianStructure> {
        let poisson = invert_sigma(&sigma_from_oneform(&self.oneform))?;
        HamiltonianStructure::new(poisson, self.hamiltonian.q.clone(), provenance)
    }
}

/// One first-order presentation of a [`QuadraticModel`].
pub trait ChartBuilder: Send + Sync {
    fn name(&self) -> &'static str;
    fn provenance(&self) -> Provenance;
    /// Whether the model admits this chart at all.
    fn applicable(&self, model: &QuadraticModel) -> Result<()>;
    fn structure(&self, model: &QuadraticModel) -> Result<HamiltonianStructure>;
    fn lagrangian(&self, model: &QuadraticModel) -> Result<FirstOrderLagrangian>;
    /// Phase state whose flow starts at position `q0` with velocity `qdot0`.
    fn initial_state(&self, model: &QuadraticModel, q0: &Vector, qdot0: &Vector) -> Result<Vector>;
}

fn stack(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn zeros(n: usize) -> Mat {
    Mat::zeros(n, n)
}

pub struct QuChart;
pub struct QpChart;
pub struct QvChart;

impl ChartBuilder for QuChart {
    fn name(&self) -> &'static str {
        "qu"
    }

    fn provenance(&self) -> Provenance {
        Provenance::Qu
    }

    fn applicable(&self, model: &QuadraticModel) -> Result<()> {
        model.t_inverse().map(|_| ())
    }

    fn structure(&self, model: &QuadraticModel) -> Result<HamiltonianStructure> {
        let n = model.n();
        let ti = model.t_inverse()?;
        // [q,q] = 0, [q,u] = T⁻¹, [u,u] = T⁻¹ΘT⁻¹; the sign of the last block
        // is the one obtained from the curl of the one-form below.
        let j = blocks(&zeros(n), &ti, &(-&ti), &linalg::antisymmetrize(&(&ti * &model.theta * &ti)));
        let m = blocks(&model.v, &zeros(n), &zeros(n), &model.t);
        HamiltonianStructure::new(PoissonMatrix::new(PhaseChart::paired(n, "u"), j)?, m, Provenance::Qu)
    }

    fn lagrangian(&self, model: &QuadraticModel) -> Result<FirstOrderLagrangian> {
        // ℓ_q = T u − ½Θ q, ℓ_u = 0
        let n = model.n();
        model.t_inverse()?;
        let a = blocks(&(&model.theta * -0.5), &model.t, &zeros(n), &zeros(n));
        let chart = PhaseChart::paired(n, "u");
        let h = blocks(&model.v, &zeros(n), &zeros(n), &model.t);
        Ok(FirstOrderLagrangian {
            oneform: AffineOneForm::new(chart, a, Vector::zeros(2 * n))?,
            hamiltonian: QuadraticObservable::quadratic(h)?,
        })
    }

    fn initial_state(&self, model: &QuadraticModel, q0: &Vector, qdot0: &Vector) -> Result<Vector> {
        model.check_len(q0, "q0")?;
        model.check_len(qdot0, "qdot0")?;
        Ok(stack(q0, qdot0))
    }
}

/// `M` of `H = ½(p + ½Θq)ᵀT⁻¹(p + ½Θq) + ½qᵀVq` in `(q, p)` order.
fn qp_hamiltonian(model: &QuadraticModel, ti: &Mat) -> Mat {
    let half = &model.theta * 0.5;
    let qq = half.transpose() * ti * &half + &model.v;
    let qp = half.transpose() * ti;
    let pq = ti * &half;
    linalg::symmetrize(&blocks(&qq, &qp, &pq, ti))
}

impl ChartBuilder for QpChart {
    fn name(&self) -> &'static str {
        "qp"
    }

    fn provenance(&self) -> Provenance {
        Provenance::Qp
    }

    fn applicable(&self, model: &QuadraticModel) -> Result<()> {
        model.t_inverse().map(|_| ())
    }

    fn structure(&self, model: &QuadraticModel) -> Result<HamiltonianStructure> {
        let n = model.n();
        let ti = model.t_inverse()?;
        let m = qp_hamiltonian(model, &ti);
        HamiltonianStructure::new(PoissonMatrix::new(PhaseChart::paired(n, "p"), linalg::canonical_j(n))?, m, Provenance::Qp)
    }

    fn lagrangian(&self, model: &QuadraticModel) -> Result<FirstOrderLagrangian> {
        // ℓ_q = p, ℓ_p = 0
        let n = model.n();
        let ti = model.t_inverse()?;
        let a = blocks(&zeros(n), &Mat::identity(n, n), &zeros(n), &zeros(n));
        Ok(FirstOrderLagrangian {
            oneform: AffineOneForm::new(PhaseChart::paired(n, "p"), a, Vector::zeros(2 * n))?,
            hamiltonian: QuadraticObservable::quadratic(qp_hamiltonian(model, &ti))?,
        })
    }

    fn initial_state(&self, model: &QuadraticModel, q0: &Vector, qdot0: &Vector) -> Result<Vector> {
        Ok(stack(q0, &momentum_map(model, q0, qdot0)?))
    }
}

impl ChartBuilder for QvChart {
    fn name(&self) -> &'static str {
        "qv"
    }

    fn provenance(&self) -> Provenance {
        Provenance::Qv
    }

    fn applicable(&self, model: &QuadraticModel) -> Result<()> {
        model.require_v_equals_t()?;
        model.t_inverse().map(|_| ())
    }

    fn structure(&self, model: &QuadraticModel) -> Result<HamiltonianStructure> {
        self.applicable(model)?;
        let n = model.n();
        let ti = model.t_inverse()?;
        let qq = linalg::antisymmetrize(&(&ti * &model.theta * &ti));
        let id = Mat::identity(n, n);
        let j = blocks(&qq, &id, &(-&id), &zeros(n));
        let m = blocks(&model.t, &zeros(n), &zeros(n), &ti);
        HamiltonianStructure::new(PoissonMatrix::new(PhaseChart::paired(n, "v"), j)?, m, Provenance::Qv)
    }

    fn lagrangian(&self, model: &QuadraticModel) -> Result<FirstOrderLagrangian> {
        // ℓ_q = v, ℓ_{v_m} = ½ (T⁻¹ΘT⁻¹)^{km} v_k
        self.applicable(model)?;
        let n = model.n();
        let ti = model.t_inverse()?;
        let p = &ti * &model.theta * &ti;
        let a = blocks(&zeros(n), &Mat::identity(n, n), &zeros(n), &(p.transpose() * 0.5));
        Ok(FirstOrderLagrangian {
            oneform: AffineOneForm::new(PhaseChart::paired(n, "v"), a, Vector::zeros(2 * n))?,
            hamiltonian: QuadraticObservable::quadratic(blocks(&model.t, &zeros(n), &zeros(n), &ti))?,
        })
    }

    fn initial_state(&self, model: &QuadraticModel, q0: &Vector, qdot0: &Vector) -> Result<Vector> {
        Ok(stack(q0, &v_map(model, q0, qdot0)?))
    }
}

static CHARTS: [&dyn ChartBuilder; 3] = [&QuChart, &QpChart, &QvChart];

/// All registered charts in a fixed order.
pub fn chart_builders() -> &'static [&'static dyn ChartBuilder] {
    &CHARTS
}

pub fn chart_builder(name: &str) -> Result<&'static dyn ChartBuilder> {
    CHARTS
        .iter()
        .copied()
        .find(|c| c.name() == name)
        .ok_or_else(|| Error::Unknown { kind: "chart", name: name.to_string() })
}

pub fn build_structure_qu(model: &QuadraticModel) -> Result<HamiltonianStructure> {
    QuChart.structure(model)
}

pub fn build_structure_qp(model: &QuadraticModel) -> Result<HamiltonianStructure> {
    QpChart.structure(model)
}

pub fn build_structure_qv(model: &QuadraticModel) -> Result<HamiltonianStructure> {
    QvChart.structure(model)
}

/// `[q,q] = θε`, `[q,v] = δ`, `[v,v] = Bε`, `H = ½(v² + ω²q²)`. The Poisson
/// matrix is singular at `θB = 1` and is returned as is.
pub fn build_structure_nc(omega: f64, theta: f64, b: f64) -> HamiltonianStructure {
    let e = linalg::epsilon2();
    let id = Mat::identity(2, 2);
    let j = blocks(&(&e * theta), &id, &(-&id), &(&e * b));
    let w2 = omega * omega;
    let m = Mat::from_diagonal(&Vector::from_vec(vec![w2, w2, 1.0, 1.0]));
    HamiltonianStructure {
        poisson: PoissonMatrix { chart: PhaseChart::paired(2, "v"), j },
        m,
        offset: 0.0,
        provenance: Provenance::Qv,
    }
}
