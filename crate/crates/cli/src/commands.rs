use hamforge_core::brackets::{check_closure_constant, check_jacobi_constant, sigma_from_oneform, FiniteDifference, LagrangeBracket};
use hamforge_core::dynamics::{self, conservation_audit, exact_trajectory, integrate, integrator, s_equivalence_with_trajectories, Trajectory};
use hamforge_core::error::Error;
use hamforge_core::fock_oracle::{self, oracle_spectrum};
use hamforge_core::lagrangian::{build_model, chart_builder, chart_builders, HamiltonianStructure, QuadraticModel};
use hamforge_core::linalg::{self, Mat};
use hamforge_core::spectra::{catalog_entries, compare_energies, h1_levels, landau_levels, structure_spectrum, LandauParams, NcParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::output::OutDir;
use crate::scenario::{Resolved, Scenario};
use crate::Failure;

const SPECTRUM_REL_TOL: f64 = 1e-6;
const DEFAULT_N_MAX: u32 = 6;
const DEFAULT_ORACLE_K: usize = 6;
const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Integrate,
    Equiv,
    Spectrum,
    Oracle,
    Catalog,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Integrate => "integrate",
            Command::Equiv => "equiv",
            Command::Spectrum => "spectrum",
            Command::Oracle => "oracle",
            Command::Catalog => "catalog",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub oracle: bool,
    pub cutoff: Option<usize>,
    pub random: Option<usize>,
    pub seed: Option<u64>,
}

pub struct CommandOutput {
    pub structures: Vec<Value>,
    pub results: Value,
    /// 0 on success, 2 for failed validation checks, 3 for a failed comparison.
    pub exit: u8,
}

pub fn run(command: Command, scenario: Option<&Scenario>, opts: &Options, out: &OutDir) -> Result<CommandOutput, Failure> {
    match (command, scenario) {
        (Command::Catalog, s) => cmd_catalog(s),
        (Command::Validate, s) => cmd_validate(s, opts),
        (_, None) => Err(Failure::parse(format!("`{}` needs a scenario file", command.name()))),
        (Command::Integrate, Some(s)) => cmd_integrate(s, out),
        (Command::Equiv, Some(s)) => cmd_equiv(s, out),
        (Command::Spectrum, Some(s)) => cmd_spectrum(s, opts, out),
        (Command::Oracle, Some(s)) => cmd_oracle(s, opts),
    }
}

fn summary(name: &str, s: &HamiltonianStructure) -> Value {
    json!({
        "name": name,
        "provenance": s.provenance,
        "labels": s.chart().labels(),
        "det_j": s.poisson.determinant(),
        "cond_j": s.poisson.condition_number(),
        "cond_m": linalg::condition_number(&s.m),
        "offset": s.offset,
    })
}

/// The catalog structure, if any, followed by every applicable chart of the model.
fn structures(r: &Resolved) -> Vec<(String, HamiltonianStructure)> {
    let mut all = Vec::new();
    if r.entry.is_some() {
        all.push((r.label.clone(), r.structure.clone()));
    }
    all.extend(r.chart_structures().into_iter().map(|(n, s)| (n.to_string(), s)));
    all
}

fn check(name: &str, value: f64, tol: f64) -> (Value, bool) {
    let passed = value <= tol;
    (json!({ "check": name, "value": value, "tol": tol, "passed": passed }), passed)
}

/// Structural checks of one structure; `sigma` is the Lagrange bracket of a
/// first-order Lagrangian when the structure came from one.
fn validate_structure(name: &str, s: &HamiltonianStructure, sigma: Option<LagrangeBracket>) -> Result<Value, Failure> {
    let fd = FiniteDifference::default();
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let mut passed = true;
    let mut push = |(v, ok): (Value, bool)| {
        passed &= ok;
        checks.push(v);
    };
    push(check("antisymmetry_J", linalg::antisymmetry_defect(s.j()), STRUCTURE_TOL));
    push(check("symmetry_M", linalg::symmetry_defect(&s.m), STRUCTURE_TOL));
    let jacobi = check_jacobi_constant(&s.poisson, fd)?;
    push(check("jacobi", jacobi.max_residual, jacobi.tol));
    let det = s.poisson.determinant();
    if s.poisson.is_singular() {
        warnings.push(format!("singular Poisson matrix: det J = {det:e}, condition number {:e}", s.poisson.condition_number()));
        push((json!({ "check": "nonsingular_J", "det_j": det, "passed": false }), false));
    } else {
        let sigma = match sigma {
            Some(sigma) => sigma,
            None => {
                let inv = linalg::invert(s.j()).ok_or(Error::SingularPoissonMatrix { ratio: 0.0 })?;
                LagrangeBracket::new(s.chart().clone(), linalg::antisymmetrize(&(-inv)))?
            }
        };
        let closure = check_closure_constant(&sigma, fd)?;
        push(check("closure_sigma", closure.max_residual, closure.tol));
        let dim = s.dim();
        let residual = linalg::inf_norm(&(&sigma.sigma * s.j() + Mat::identity(dim, dim)));
        push(check("sigma_J_plus_I", residual, STRUCTURE_TOL * sigma.condition_number().max(1.0)));
    }
    Ok(json!({ "name": name, "det_j": det, "checks": checks, "warnings": warnings, "passed": passed }))
}

fn chart_sigma(model: &QuadraticModel, chart: &str) -> Result<LagrangeBracket, Failure> {
    Ok(sigma_from_oneform(&chart_builder(chart)?.lagrangian(model)?.oneform))
}

fn random_model(rng: &mut impl Rng, n: usize, v_equals_t: bool) -> Result<QuadraticModel, Failure> {
    let mut uniform = |r: usize, c: usize| Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let a = uniform(n, n);
    let t = a.transpose() * a + Mat::identity(n, n) * 0.5;
    let g = uniform(n, n);
    let b = uniform(n, n);
    let v = if v_equals_t { t.clone() } else { b.transpose() * b + Mat::identity(n, n) * 0.5 };
    Ok(build_model(t, &g - g.transpose(), v)?)
}

fn cmd_validate(scenario: Option<&Scenario>, opts: &Options) -> Result<CommandOutput, Failure> {
    if scenario.is_none() && opts.random.is_none() {
        return Err(Failure::parse("`validate` needs a scenario file or --random N"));
    }
    let mut passed = true;
    let mut summaries = Vec::new();
    let mut reports = Vec::new();
    if let Some(sc) = scenario {
        let r = sc.resolve()?;
        for (name, s) in structures(&r) {
            let sigma = match (&r.model, name.as_str()) {
                (Some(m), "qu" | "qp" | "qv") => Some(chart_sigma(m, &name)?),
                _ => None,
            };
            let report = validate_structure(&name, &s, sigma)?;
            passed &= report["passed"] == true;
            summaries.push(summary(&name, &s));
            reports.push(report);
        }
    }
    let mut random = Value::Null;
    if let Some(count) = opts.random {
        let seed = opts.seed.or(scenario.and_then(|s| s.seed)).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut models = Vec::with_capacity(count);
        let mut failures = 0usize;
        for i in 0..count {
            let n = 2 + i % 2;
            let v_equals_t = i % 2 == 0;
            let model = random_model(&mut rng, n, v_equals_t)?;
            let mut ok = true;
            let mut charts = Vec::new();
            for b in chart_builders().iter().filter(|b| b.applicable(&model).is_ok()) {
                let s = b.structure(&model)?;
                let report = validate_structure(b.name(), &s, Some(chart_sigma(&model, b.name())?))?;
                ok &= report["passed"] == true;
                charts.push(report);
            }
            failures += usize::from(!ok);
            models.push(json!({ "index": i, "n": n, "v_equals_t": v_equals_t, "passed": ok, "charts": charts }));
        }
        passed &= failures == 0;
        random = json!({ "seed": seed, "count": count, "failures": failures, "models": models });
    }
    Ok(CommandOutput {
        structures: summaries,
        results: json!({ "validation": reports, "random": random, "passed": passed }),
        exit: if passed { 0 } else { 2 },
    })
}

fn write_trajectory(out: &OutDir, name: &str, traj: &Trajectory) -> Result<(), Failure> {
    out.write_with(name, |w| traj.write_csv(w))
}

fn cmd_integrate(sc: &Scenario, out: &OutDir) -> Result<CommandOutput, Failure> {
    let block = sc.integrate.as_ref().ok_or_else(|| Failure::domain("scenario has no `integrate` block"))?;
    let r = sc.resolve()?;
    let default_chart = if r.entry.is_some() { "catalog" } else { "qp" };
    let chart = block.chart.as_deref().unwrap_or(default_chart);
    let structure = match chart {
        "catalog" if r.entry.is_some() => r.structure.clone(),
        name => {
            let model = r.model.as_ref().ok_or_else(|| Failure::domain(format!("chart `{name}` needs a second-order model")))?;
            chart_builder(name)?.structure(model)?
        }
    };
    let x0 = r.initial_state(&structure, chart, block.x0.as_deref(), block.q0.as_deref(), block.qdot0.as_deref())?;
    let t_end = block.t_end.unwrap_or(dynamics::DEFAULT_T_END);
    let dt = block.dt.unwrap_or(dynamics::DEFAULT_DT);
    let method = block.method.as_deref().unwrap_or("implicit_midpoint");
    let result = match method {
        "exact" => exact_trajectory(&structure, &x0, t_end, dt),
        name => integrate(&structure, &x0, t_end, dt, integrator(name)?),
    };
    let traj = match result {
        Ok(t) => t,
        Err(Error::NonFiniteState(partial)) => {
            write_trajectory(out, "trajectory.csv", &partial.partial)?;
            return Err(Error::NonFiniteState(partial).into());
        }
        Err(e) => return Err(e.into()),
    };
    write_trajectory(out, "trajectory.csv", &traj)?;
    let audit = conservation_audit(&traj, &structure)?;
    Ok(CommandOutput {
        structures: vec![summary(chart, &structure)],
        results: json!({
            "chart": chart,
            "method": method,
            "t_end": t_end,
            "dt": dt,
            "samples": traj.len(),
            "final_state": traj.states.last().map(|x| x.as_slice().to_vec()),
            "max_energy_drift": audit.max_energy_drift,
            "max_casimir_drift": audit.max_casimir_drift,
            "casimir_count": audit.casimir_count,
        }),
        exit: 0,
    })
}

fn cmd_equiv(sc: &Scenario, out: &OutDir) -> Result<CommandOutput, Failure> {
    let block = sc.equiv.clone().unwrap_or_default();
    let fallback = sc.integrate.clone().unwrap_or_default();
    if sc.equiv.is_none() && sc.integrate.is_none() {
        return Err(Failure::domain("scenario has no `equiv` block"));
    }
    let r = sc.resolve()?;
    let model = r.model.as_ref().ok_or_else(|| Failure::domain(format!("`{}` has no second-order model to compare charts of", r.label)))?;
    let charts: Vec<String> = match block.charts {
        Some(c) => c,
        None => r.chart_structures().into_iter().map(|(n, _)| n.to_string()).collect(),
    };
    let q0 = block.q0.or(fallback.q0).ok_or_else(|| Failure::domain("equivalence run needs `q0`"))?;
    let qdot0 = block.qdot0.or(fallback.qdot0).ok_or_else(|| Failure::domain("equivalence run needs `qdot0`"))?;
    let t_end = block.t_end.or(fallback.t_end).unwrap_or(dynamics::DEFAULT_T_END);
    let dt = block.dt.or(fallback.dt).unwrap_or(dynamics::DEFAULT_DT);
    let tol = block.tol.unwrap_or(dynamics::DEFAULT_EQUIV_TOL);
    let names: Vec<&str> = charts.iter().map(String::as_str).collect();
    let (report, trajectories) = s_equivalence_with_trajectories(
        model,
        &names,
        &linalg::Vector::from_vec(q0),
        &linalg::Vector::from_vec(qdot0),
        t_end,
        dt,
        tol,
    )?;
    let mut summaries = Vec::new();
    for (name, traj) in names.iter().zip(&trajectories) {
        write_trajectory(out, &format!("trajectory_{name}.csv"), traj)?;
        summaries.push(summary(name, &chart_builder(name)?.structure(model)?));
    }
    let exit = if report.passed { 0 } else { 3 };
    Ok(CommandOutput { structures: summaries, results: json!({ "equivalence": report }), exit })
}

fn oracle_params(sc: &Scenario, opts: &Options) -> (usize, usize) {
    let block = sc.oracle.clone().unwrap_or_default();
    (opts.cutoff.or(block.cutoff).unwrap_or(fock_oracle::DEFAULT_CUTOFF), block.k.unwrap_or(DEFAULT_ORACLE_K))
}

fn cmd_spectrum(sc: &Scenario, opts: &Options, out: &OutDir) -> Result<CommandOutput, Failure> {
    let block = sc.spectrum.clone().unwrap_or_default();
    let n_max = block.n_max.unwrap_or(DEFAULT_N_MAX);
    let l_max = block.l_max.unwrap_or(n_max);
    let r = sc.resolve()?;
    let spectrum = structure_spectrum(&r.structure, n_max)?;
    out.write_with("levels.csv", |w| spectrum.write_csv(w))?;
    let mut results = json!({ "spectrum": spectrum });
    match r.entry.map(|e| e.name()) {
        Some("landau_qp" | "landau_qu") => {
            results["landau_levels"] = json!(landau_levels(&LandauParams::from_set(&r.params)?, l_max)?);
        }
        Some("nc_h1") => {
            results["h1_levels"] = json!(h1_levels(&NcParams::from_set(&r.params)?, n_max, l_max)?);
        }
        _ => {}
    }
    let mut exit = 0;
    if opts.oracle {
        let (cutoff, k) = oracle_params(sc, opts);
        let oracle = oracle_spectrum(&r.structure, cutoff, k)?;
        let comparison = compare_energies(&oracle.levels, &spectrum.energies(), k, SPECTRUM_REL_TOL);
        if !comparison.equal {
            exit = 3;
        }
        results["oracle"] = json!(oracle);
        results["comparison"] = json!(comparison);
    }
    Ok(CommandOutput { structures: vec![summary(&r.label, &r.structure)], results, exit })
}

fn cmd_oracle(sc: &Scenario, opts: &Options) -> Result<CommandOutput, Failure> {
    let r = sc.resolve()?;
    let (cutoff, k) = oracle_params(sc, opts);
    let oracle = oracle_spectrum(&r.structure, cutoff, k)?;
    Ok(CommandOutput { structures: vec![summary(&r.label, &r.structure)], results: json!({ "oracle": oracle }), exit: 0 })
}

fn cmd_catalog(sc: Option<&Scenario>) -> Result<CommandOutput, Failure> {
    let entries: Vec<Value> = match sc.and_then(|s| s.catalog.as_ref().map(|_| s)) {
        Some(s) => {
            let r = s.resolve()?;
            let e = r.entry.expect("catalog scenario");
            vec![json!({ "name": e.name(), "description": e.description(), "params": e.params(), "resolved": r.params })]
        }
        None => catalog_entries()
            .iter()
            .map(|e| json!({ "name": e.name(), "description": e.description(), "params": e.params() }))
            .collect(),
    };
    Ok(CommandOutput { structures: Vec::new(), results: json!({ "entries": entries }), exit: 0 })
}
