use std::path::Path;

use hamforge_core::lagrangian::{build_model, chart_builder, chart_builders, HamiltonianStructure, Provenance, QuadraticModel};
use hamforge_core::linalg::{Mat, Vector};
use hamforge_core::spectra::{catalog_entry, CatalogEntry, ParamSet};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateBlock {
    pub chart: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub q0: Option<Vec<f64>>,
    pub qdot0: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub method: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivBlock {
    pub charts: Option<Vec<String>>,
    pub tol: Option<f64>,
    pub q0: Option<Vec<f64>>,
    pub qdot0: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    pub n_max: Option<u32>,
    pub l_max: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub cutoff: Option<usize>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: Option<ModelSpec>,
    pub catalog: Option<String>,
    #[serde(default)]
    pub params: ParamSet,
    pub seed: Option<u64>,
    pub integrate: Option<IntegrateBlock>,
    pub equiv: Option<EquivBlock>,
    pub spectrum: Option<SpectrumBlock>,
    pub oracle: Option<OracleBlock>,
}

fn matrix(rows: &[Vec<f64>], n: usize, name: &str) -> Result<Mat, Failure> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Failure::parse(format!("{name} must be a {n}x{n} row-major array")));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Scenario, Failure> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| Failure::parse(format!("malformed scenario: {e}")))?;
    match (&scenario.model, &scenario.catalog) {
        (Some(_), Some(_)) => return Err(Failure::parse("scenario has both `model` and `catalog`")),
        (None, None) => return Err(Failure::parse("scenario needs either `model` or `catalog`")),
        (Some(m), None) => {
            if m.n == 0 {
                return Err(Failure::parse("model dimension n must be positive"));
            }
            for (rows, name) in [(&m.t, "T"), (&m.theta, "theta"), (&m.v, "V")] {
                matrix(rows, m.n, name)?;
            }
            if !scenario.params.is_empty() {
                return Err(Failure::parse("`params` only applies to catalog scenarios"));
            }
        }
        (None, Some(_)) => {}
    }
    Ok(scenario)
}

/// What a scenario resolves to: a structure to analyse and, when there is
/// one, the second-order model behind it.
pub struct Resolved {
    pub label: String,
    pub entry: Option<&'static dyn CatalogEntry>,
    pub params: ParamSet,
    pub model: Option<QuadraticModel>,
    pub structure: HamiltonianStructure,
}

impl Scenario {
    pub fn resolve(&self) -> Result<Resolved, Failure> {
        if let Some(m) = &self.model {
            let model = build_model(matrix(&m.t, m.n, "T")?, matrix(&m.theta, m.n, "theta")?, matrix(&m.v, m.n, "V")?)?;
            let structure = chart_builder("qp")?.structure(&model)?;
            return Ok(Resolved { label: "model".into(), entry: None, params: ParamSet::new(), model: Some(model), structure });
        }
        let name = self.catalog.as_deref().unwrap_or_default();
        let entry = catalog_entry(name)?;
        let params = entry.resolve(&self.params)?;
        Ok(Resolved {
            label: name.to_string(),
            entry: Some(entry),
            model: entry.model(&params)?,
            structure: entry.build(&params)?,
            params,
        })
    }

    pub fn echo(&self) -> serde_json::Value {
        match (&self.model, &self.catalog) {
            (Some(m), _) => serde_json::json!({ "model": m }),
            (_, Some(c)) => serde_json::json!({ "catalog": c, "params": self.params }),
            _ => serde_json::Value::Null,
        }
    }
}

impl Resolved {
    /// Chart structures of the model that apply, in registry order.
    pub fn chart_structures(&self) -> Vec<(&'static str, HamiltonianStructure)> {
        let Some(model) = &self.model else { return Vec::new() };
        chart_builders()
            .iter()
            .filter(|b| b.applicable(model).is_ok())
            .filter_map(|b| b.structure(model).ok().map(|s| (b.name(), s)))
            .collect()
    }

    /// Phase-space state for `structure` from either `x0` or `(q0, q̇0)`.
    pub fn initial_state(&self, structure: &HamiltonianStructure, chart: &str, x0: Option<&[f64]>, q0: Option<&[f64]>, qdot0: Option<&[f64]>) -> Result<Vector, Failure> {
        match (x0, q0, qdot0) {
            (Some(x), None, None) => {
                if x.len() != structure.dim() {
                    return Err(Failure::domain(format!("x0 has length {}, chart has dimension {}", x.len(), structure.dim())));
                }
                Ok(Vector::from_row_slice(x))
            }
            (None, Some(q), Some(v)) => {
                let model = self.model.as_ref().ok_or_else(|| Failure::domain("q0/qdot0 need a second-order model; give x0 instead"))?;
                let chart = match (chart, structure.provenance) {
                    ("catalog", Provenance::Qu) => "qu",
                    ("catalog", Provenance::Qp) => "qp",
                    ("catalog", Provenance::Qv) => "qv",
                    ("catalog", Provenance::Custom) => return Err(Failure::domain("q0/qdot0 cannot be mapped into this structure; give x0 instead")),
                    (name, _) => name,
                };
                Ok(chart_builder(chart)?.initial_state(model, &Vector::from_row_slice(q), &Vector::from_row_slice(v))?)
            }
            _ => Err(Failure::parse("initial data needs either `x0` or both `q0` and `qdot0`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_one_source() {
        assert!(parse(r#"{"catalog": "nc_h1"}"#).is_ok());
        assert_eq!(parse(r#"{}"#).unwrap_err().code, 1);
        let both = r#"{"catalog": "nc_h1", "model": {"n": 1, "T": [[1]], "theta": [[0]], "V": [[1]]}}"#;
        assert_eq!(parse(both).unwrap_err().code, 1);
    }

    #[test]
    fn ragged_matrix_is_a_parse_error() {
        let text = r#"{"model": {"n": 2, "T": [[1, 0], [0]], "theta": [[0, 0], [0, 0]], "V": [[1, 0], [0, 1]]}}"#;
        assert_eq!(parse(text).unwrap_err().code, 1);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert_eq!(parse(r#"{"catalog": "nc_h1", "colour": 1}"#).unwrap_err().code, 1);
    }

    #[test]
    fn resolve_catalog_and_model() {
        let r = parse(r#"{"catalog": "landau_qu", "params": {"B": 2}}"#).unwrap().resolve().unwrap();
        assert_eq!(r.params["B"], 2.0);
        assert_eq!(r.chart_structures().len(), 2);
        let bad = parse(r#"{"catalog": "landau_qu", "params": {"omega": 2}}"#).unwrap().resolve();
        assert_eq!(bad.err().unwrap().code, 2);
        let m = parse(r#"{"model": {"n": 1, "T": [[2]], "theta": [[0]], "V": [[2]]}}"#).unwrap().resolve().unwrap();
        assert_eq!(m.chart_structures().len(), 3);
    }
}
