//! Named scenarios, each behind [`CatalogEntry`] and looked up by name.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::brackets::{PhaseChart, PoissonMatrix};
use crate::error::{Error, Result};
use crate::lagrangian::{build_structure_nc, build_structure_qp, build_structure_qu, HamiltonianStructure, Provenance, QuadraticModel};
use crate::linalg::{self, blocks, Mat};

/// Parameter values by name, as they appear in scenario files.
pub type ParamSet = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub description: &'static str,
}

pub trait CatalogEntry: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn params(&self) -> &'static [ParamSpec];
    fn build(&self, params: &ParamSet) -> Result<HamiltonianStructure>;
    /// The second-order model behind the entry, when it has one.
    fn model(&self, params: &ParamSet) -> Result<Option<QuadraticModel>>;

    /// Fills defaults and rejects unknown or non-finite parameters.
    fn resolve(&self, params: &ParamSet) -> Result<ParamSet> {
        let specs = self.params();
        if let Some(unknown) = params.keys().find(|k| !specs.iter().any(|s| s.name == k.as_str())) {
            return Err(Error::InvalidParameter(format!("`{unknown}` is not a parameter of {}", self.name())));
        }
        specs
            .iter()
            .map(|s| {
                let v = params.get(s.name).copied().unwrap_or(s.default);
                if v.is_finite() {
                    Ok((s.name.to_string(), v))
                } else {
                    Err(Error::InvalidParameter(format!("{} = {v} is not finite", s.name)))
                }
            })
            .collect()
    }
}

const LANDAU_PARAMS: [ParamSpec; 4] = [
    ParamSpec { name: "m", default: 1.0, description: "particle mass" },
    ParamSpec { name: "e", default: 1.0, description: "charge" },
    ParamSpec { name: "B", default: 1.0, description: "magnetic field along z" },
    ParamSpec { name: "p3", default: 0.0, description: "conserved momentum along the field" },
];

const NC_PARAMS: [ParamSpec; 3] = [
    ParamSpec { name: "omega", default: 1.0, description: "oscillator frequency" },
    ParamSpec { name: "theta", default: 0.2, description: "coordinate noncommutativity" },
    ParamSpec { name: "B", default: 0.5, description: "momentum noncommutativity" },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauParams {
    pub m: f64,
    pub e: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub p3: f64,
}

impl Default for LandauParams {
    fn default() -> Self {
        Self { m: 1.0, e: 1.0, b: 1.0, p3: 0.0 }
    }
}

impl LandauParams {
    pub fn from_set(set: &ParamSet) -> Result<Self> {
        let r = LandauQp.resolve(set)?;
        let p = Self { m: r["m"], e: r["e"], b: r["B"], p3: r["p3"] };
        if !(p.m > 0.0) {
            return Err(Error::InvalidParameter(format!("mass m = {} must be positive", p.m)));
        }
        Ok(p)
    }

    pub fn to_set(&self) -> ParamSet {
        [("m", self.m), ("e", self.e), ("B", self.b), ("p3", self.p3)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    pub fn model(&self) -> Result<QuadraticModel> {
        QuadraticModel::landau(self.m, self.e, self.b)
    }

    fn offset(&self) -> f64 {
        self.p3 * self.p3 / (2.0 * self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NcParams {
    pub omega: f64,
    pub theta: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

impl Default for NcParams {
    fn default() -> Self {
        Self { omega: 1.0, theta: 0.2, b: 0.5 }
    }
}

impl NcParams {
    pub fn from_set(set: &ParamSet) -> Result<Self> {
        let r = NcH1.resolve(set)?;
        Ok(Self { omega: r["omega"], theta: r["theta"], b: r["B"] })
    }

    pub fn to_set(&self) -> ParamSet {
        [("omega", self.omega), ("theta", self.theta), ("B", self.b)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    pub fn model(&self) -> Result<QuadraticModel> {
        QuadraticModel::nc_oscillator(self.omega, self.theta, self.b)
    }

    /// `λ = B + θω²`.
    pub fn lambda(&self) -> f64 {
        self.b + self.theta * self.omega * self.omega
    }

    /// `[q,q] = 0`, `[q,u] = δ`, `[u,u] = λε`, `H₁ = ½u² + ½(1 − Bθ)ω²q²`.
    pub fn h1(&self) -> HamiltonianStructure {
        let e = linalg::epsilon2();
        let id = Mat::identity(2, 2);
        let j = blocks(&Mat::zeros(2, 2), &id, &(-&id), &(&e * self.lambda()));
        let k = (1.0 - self.b * self.theta) * self.omega * self.omega;
        let m = Mat::from_diagonal(&linalg::Vector::from_vec(vec![k, k, 1.0, 1.0]));
        custom(PhaseChart::paired(2, "u"), j, m, Provenance::Qu)
    }

    /// `[q,q] = θε`, `[q,u] = (1 + θ²ω²)δ`, `[u,u] = (θ³ω⁴ + 2θω² + B)ε`,
    /// `H₂ = ½u² + ½ω²(1 + θ²ω²)q² + ω²θ(q¹u₂ − q²u₁)`.
    pub fn h2(&self) -> HamiltonianStructure {
        let (w2, th, b) = (self.omega * self.omega, self.theta, self.b);
        let c = 1.0 + th * th * w2;
        let uu = th.powi(3) * w2 * w2 + 2.0 * th * w2 + b;
        let e = linalg::epsilon2();
        let id = Mat::identity(2, 2);
        let j = blocks(&(&e * th), &(&id * c), &(&id * -c), &(&e * uu));
        // the cross term qᵀεu is split evenly over the two off-diagonal blocks
        let cross = &e * (w2 * th);
        let m = blocks(&(&id * (w2 * c)), &cross, &cross.transpose(), &id);
        custom(PhaseChart::paired(2, "u"), j, m, Provenance::Qu)
    }

    /// Canonical realization of the `H₂` brackets for `θ > 0`, `Bθ > 1`.
    pub fn h2_realization(&self) -> Result<H2Realization> {
        let (th, b) = (self.theta, self.b);
        if !(th > 0.0) || !(b * th > 1.0) {
            return Err(Error::RealizationDomain { theta: th, b_theta: b * th });
        }
        let w2 = self.omega * self.omega;
        let c = 1.0 + th * th * w2;
        let a = ((th * b - 1.0) / th).sqrt();
        let s = th.sqrt();
        // rows: q1, q2, u1, u2 in terms of (x1, x2, p1, p2)
        #[rustfmt::skip]
        let r = Mat::from_row_slice(4, 4, &[
            s, 0.0, 0.0, 0.0,
            0.0, 0.0, s, 0.0,
            0.0, a, c / s, 0.0,
            -c / s, 0.0, 0.0, a,
        ]);
        // 2θ·H₂ in the canonical variables
        let n = r.transpose() * &self.h2().m * &r * th;
        Ok(H2Realization {
            x1_p1: n[(0, 0)],
            x2_p2: n[(1, 1)],
            angular: 2.0 * n[(0, 3)],
            form_defect: [
                (n[(0, 0)] - n[(2, 2)]).abs(),
                (n[(1, 1)] - n[(3, 3)]).abs(),
                (n[(0, 3)] + n[(1, 2)]).abs(),
                n[(0, 1)].abs(),
                n[(0, 2)].abs(),
                n[(1, 3)].abs(),
                n[(2, 3)].abs(),
            ]
            .into_iter()
            .fold(0.0, f64::max),
            map: r,
        })
    }
}

/// Canonical coordinates `(x₁, x₂, p₁, p₂)` realizing the `H₂` brackets, and
/// `2θH₂ = U(x₁² + p₁²) + V(x₂² + p₂²) + W L₃` with `L₃ = x₁p₂ − x₂p₁`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Realization {
    /// `(q¹, q², u₁, u₂) = map · (x₁, x₂, p₁, p₂)`.
    pub map: Mat,
    pub x1_p1: f64,
    pub x2_p2: f64,
    pub angular: f64,
    /// Largest coefficient of `2θH₂` outside the `U, V, W` pattern.
    pub form_defect: f64,
}

fn custom(chart: PhaseChart, j: Mat, m: Mat, provenance: Provenance) -> HamiltonianStructure {
    HamiltonianStructure { poisson: PoissonMatrix { chart, j }, m, offset: 0.0, provenance }
}

pub struct LandauQp;
pub struct LandauQu;
pub struct NcH1;
pub struct NcH2;
pub struct NcNp;

impl CatalogEntry for LandauQp {
    fn name(&self) -> &'static str {
        "landau_qp"
    }
    fn description(&self) -> &'static str {
        "charged particle in a uniform field, canonical {q,p} variables, symmetric gauge"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &LANDAU_PARAMS
    }
    fn build(&self, params: &ParamSet) -> Result<HamiltonianStructure> {
        let p = LandauParams::from_set(params)?;
        Ok(build_structure_qp(&p.model()?)?.with_offset(p.offset()))
    }
    fn model(&self, params: &ParamSet) -> Result<Option<QuadraticModel>> {
        LandauParams::from_set(params)?.model().map(Some)
    }
}

impl CatalogEntry for LandauQu {
    fn name(&self) -> &'static str {
        "landau_qu"
    }
    fn description(&self) -> &'static str {
        "charged particle in a uniform field, velocity variables {q,u} with noncommuting velocities"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &LANDAU_PARAMS
    }
    fn build(&self, params: &ParamSet) -> Result<HamiltonianStructure> {
        let p = LandauParams::from_set(params)?;
        Ok(build_structure_qu(&p.model()?)?.with_offset(p.offset()))
    }
    fn model(&self, params: &ParamSet) -> Result<Option<QuadraticModel>> {
        LandauParams::from_set(params)?.model().map(Some)
    }
}

impl CatalogEntry for NcH1 {
    fn name(&self) -> &'static str {
        "nc_h1"
    }
    fn description(&self) -> &'static str {
        "oscillator equations with commuting coordinates: [u,u] = (B + θω²)ε, H1 = u²/2 + (1 − Bθ)ω²q²/2"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &NC_PARAMS
    }
    fn build(&self, params: &ParamSet) -> Result<HamiltonianStructure> {
        Ok(NcParams::from_set(params)?.h1())
    }
    fn model(&self, params: &ParamSet) -> Result<Option<QuadraticModel>> {
        NcParams::from_set(params)?.model().map(Some)
    }
}

impl CatalogEntry for NcH2 {
    fn name(&self) -> &'static str {
        "nc_h2"
    }
    fn description(&self) -> &'static str {
        "same oscillator equations with noncommuting coordinates [q,q] = θε and an angular-momentum coupling"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &NC_PARAMS
    }
    fn build(&self, params: &ParamSet) -> Result<HamiltonianStructure> {
        Ok(NcParams::from_set(params)?.h2())
    }
    fn model(&self, params: &ParamSet) -> Result<Option<QuadraticModel>> {
        NcParams::from_set(params)?.model().map(Some)
    }
}

impl CatalogEntry for NcNp {
    fn name(&self) -> &'static str {
        "nc_np"
    }
    fn description(&self) -> &'static str {
        "noncommutative harmonic oscillator: [q,q] = θε, [q,v] = δ, [v,v] = Bε, H = (v² + ω²q²)/2"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &NC_PARAMS
    }
    fn build(&self, params: &ParamSet) -> Result<HamiltonianStructure> {
        let p = NcParams::from_set(params)?;
        Ok(build_structure_nc(p.omega, p.theta, p.b))
    }
    fn model(&self, _params: &ParamSet) -> Result<Option<QuadraticModel>> {
        Ok(None)
    }
}

static ENTRIES: [&dyn CatalogEntry; 5] = [&LandauQp, &LandauQu, &NcH1, &NcH2, &NcNp];

/// Registered entries in a fixed order.
pub fn catalog_entries() -> &'static [&'static dyn CatalogEntry] {
    &ENTRIES
}

pub fn catalog_entry(name: &str) -> Result<&'static dyn CatalogEntry> {
    ENTRIES
        .iter()
        .copied()
        .find(|e| e.name() == name)
        .ok_or_else(|| Error::Unknown { kind: "catalog entry", name: name.to_string() })
}

pub fn catalog(name: &str, params: &ParamSet) -> Result<HamiltonianStructure> {
    catalog_entry(name)?.build(params)
}
