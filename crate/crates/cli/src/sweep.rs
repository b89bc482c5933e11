use rayon::prelude::*;
use serde_json::{json, Value};

use crate::commands::{self, Command, Options};
use crate::output::{to_json, OutDir};
use crate::scenario::Scenario;
use crate::Failure;

pub const THREADS_ENV: &str = "HAMFORGE_THREADS";
const MAX_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub param: String,
    pub values: Vec<f64>,
}

/// Shortest decimal that survives the round trip, with grid noise trimmed.
fn tidy(v: f64) -> f64 {
    format!("{v:.12e}").parse().expect("formatted float parses")
}

/// Parses `param=a:b:step` into the inclusive grid `a, a + step, …, ≤ b`.
pub fn parse_sweep(spec: &str) -> Result<Grid, Failure> {
    let bad = || Failure::parse(format!("sweep `{spec}` is not of the form param=a:b:step"));
    let (param, range) = spec.split_once('=').ok_or_else(bad)?;
    let parts: Vec<f64> = range.split(':').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [a, b, step] = parts[..] else { return Err(bad()) };
    if param.is_empty() || !(a.is_finite() && b.is_finite() && step > 0.0 && step.is_finite()) || b < a {
        return Err(bad());
    }
    let count = ((b - a) / step * (1.0 + 1e-12) + 1e-9).floor() as usize + 1;
    if count > MAX_POINTS {
        return Err(Failure::parse(format!("sweep has {count} points, more than {MAX_POINTS}")));
    }
    let values = (0..count).map(|i| tidy(a + i as f64 * step)).collect();
    Ok(Grid { param: param.to_string(), values })
}

fn pool() -> Result<rayon::ThreadPool, Failure> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| Failure::parse(format!("{THREADS_ENV}={v} is not a positive integer")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::domain(format!("cannot start worker pool: {e}")))
}

/// Runs one job per grid value; each job writes under `out/<param>=<value>/`.
pub fn run_sweep(command: Command, base: &Scenario, grid: &Grid, opts: &Options, out: &OutDir) -> Result<(Value, u8), Failure> {
    if base.catalog.is_none() {
        return Err(Failure::domain("--sweep varies catalog parameters; the scenario has no `catalog`"));
    }
    let jobs: Vec<(String, f64, Scenario)> = grid
        .values
        .iter()
        .map(|&v| {
            let mut sc = base.clone();
            sc.params.insert(grid.param.clone(), v);
            (format!("{}={}", grid.param, v), v, sc)
        })
        .collect();
    let results: Vec<(Value, u8)> = pool()?.install(|| {
        jobs.par_iter()
            .map(|(key, value, sc)| {
                let dir = out.join(key);
                let (job, code) = match commands::run(command, Some(sc), opts, &dir) {
                    Ok(r) => (json!({ "key": key, "value": value, "exit_code": r.exit, "structures": r.structures, "results": r.results }), r.exit),
                    Err(f) => (json!({ "key": key, "value": value, "exit_code": f.code, "error": f.message }), f.code),
                };
                match dir.write_str("report.json", &to_json(&job)) {
                    Ok(()) => (job, code),
                    Err(f) => (json!({ "key": key, "value": value, "exit_code": f.code, "error": f.message }), f.code),
                }
            })
            .collect()
    });
    let exit = results.iter().map(|(_, c)| *c).max().unwrap_or(0);
    let jobs: Vec<Value> = results.into_iter().map(|(v, _)| v).collect();
    Ok((json!({ "sweep": { "param": grid.param, "jobs": jobs } }), exit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive_and_tidy() {
        let g = parse_sweep("theta=0:1:0.1").unwrap();
        assert_eq!(g.values.len(), 11);
        assert_eq!(g.values[3], 0.3);
        assert_eq!(g.values[10], 1.0);
        assert_eq!(parse_sweep("B=2:2:1").unwrap().values, vec![2.0]);
    }

    #[test]
    fn malformed_specs() {
        for spec in ["theta", "theta=0:1", "theta=1:0:0.1", "theta=0:1:0", "=0:1:0.5", "theta=a:1:0.5"] {
            assert_eq!(parse_sweep(spec).unwrap_err().code, 1, "{spec}");
        }
    }
}
