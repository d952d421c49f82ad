//! Dispatch of a validated config to its experiment, and the result record.

use std::time::Instant;

use pathlift::experiments::{
    damped_bounds, heat_moment, kernel_suite, lift_consistency, path_invariants, submersion_sweep, weak_order, Sweep,
};
use pathlift::ibp::{adapted_ibp_check, mc_ibp_check};
use pathlift::oracle::{geodesic_oracle_ibp, select_convention};
use pathlift::submersion::structure_csv;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Experiment, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Config,
    Env,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub value: u64,
    pub source: SeedSource,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub verdict: bool,
    pub seed: Option<SeedProvenance>,
    pub workers: Option<usize>,
    pub wall_clock_seconds: f64,
    /// The experiment as run, after command-line and environment overrides.
    pub experiment: Experiment,
    /// Experiment-specific estimates, standard errors and verdicts.
    pub report: Value,
    #[serde(default)]
    pub sweeps: Vec<Sweep>,
    /// Set when the experiment aborted instead of reaching a verdict.
    #[serde(default)]
    pub error: Option<String>,
    /// Tabular output written as `<stem>.csv`, if any.
    #[serde(skip)]
    pub table: Option<String>,
}

struct Outcome {
    verdict: bool,
    report: Value,
    sweeps: Vec<Sweep>,
    table: Option<String>,
}

impl Outcome {
    fn new(verdict: bool, report: impl Serialize) -> pathlift::Result<Self> {
        Ok(Outcome { verdict, report: serde_json::to_value(report)?, sweeps: Vec::new(), table: None })
    }

    fn with_sweep(mut self, s: Sweep) -> Self {
        self.sweeps.push(s);
        self
    }
}

fn dispatch(exp: &Experiment) -> pathlift::Result<Outcome> {
    match exp {
        Experiment::DevelopCheck(c) => {
            let r = damped_bounds(&c.manifold, c.n_steps, &c.mc)?;
            Outcome::new(r.verdict, r)
        }
        Experiment::LiftCheck(c) => {
            let r = lift_consistency(&c.manifold, &c.field, &c.levels, &c.mc)?;
            let sweep = r.form_gap.clone();
            Ok(Outcome::new(r.verdict, r)?.with_sweep(sweep))
        }
        Experiment::Ibp(c) => {
            let r = mc_ibp_check(c)?;
            Outcome::new(r.verdict, r)
        }
        Experiment::AdaptedIbp(c) => {
            let r = adapted_ibp_check(c)?;
            Outcome::new(r.verdict, r)
        }
        Experiment::OracleIbp(c) => {
            let reports = c.runs().iter().map(geodesic_oracle_ibp).collect::<pathlift::Result<Vec<_>>>()?;
            let mut verdict = reports.iter().all(|r| r.verdict);
            // flat runs carry no curvature signal, so a selection may not exist
            let selection = select_convention(&reports).ok();
            if let Some(expected) = c.expect {
                verdict &= selection.is_some_and(|(sel, _)| sel == expected);
            }
            let selected = selection.map(|(convention, fit)| json!({ "convention": convention, "fit": fit }));
            Outcome::new(verdict, json!({ "runs": reports, "selection": selected }))
        }
        Experiment::Submersion(c) => {
            let r = submersion_sweep(c.case, &c.field, c.n_points, c.seed)?;
            let table = structure_csv(&r.rows);
            let mut out = Outcome::new(r.verdict, r)?;
            out.table = Some(table);
            Ok(out)
        }
        Experiment::CmKernelSuite(c) => {
            let r = kernel_suite(c.n_steps, c.dim, c.cases, c.competitors, c.seed, &c.rk4_levels)?;
            let sweep = r.rk4.clone();
            Ok(Outcome::new(r.verdict, r)?.with_sweep(sweep))
        }
        Experiment::HeatMoment(c) => {
            let r = heat_moment(c.n_steps, &c.mc)?;
            Outcome::new(r.verdict, r)
        }
        Experiment::WeakOrder(c) => {
            let r = weak_order(&c.levels, &c.mc)?;
            let verdict = r.order >= c.min_order;
            let sweep = r.sweep();
            Ok(Outcome::new(verdict, json!({ "weak_order": r, "min_order": c.min_order, "verdict": verdict }))?.with_sweep(sweep))
        }
        Experiment::Invariants(c) => {
            let r = path_invariants(&c.manifold, &c.field, &c.f, &c.g, c.n_steps, &c.mc)?;
            Outcome::new(r.verdict, r)
        }
    }
}

/// Errors that reveal a bad config rather than a failed experiment.
pub fn is_config_error(e: &pathlift::Error) -> bool {
    use pathlift::Error::*;
    matches!(e, Config(_) | InvalidManifold(_) | UnsupportedField { .. } | DimensionMismatch { .. } | PartitionOffGrid(_) | CostGuard(_))
}

/// Run the experiment. Config-class errors come back as `Err`; any other
/// failure becomes a failing result carrying the error message.
pub fn run(cfg: &RunConfig, seed_source: SeedSource) -> Result<RunResult, pathlift::Error> {
    let exp = &cfg.experiment;
    let start = Instant::now();
    let outcome = match dispatch(exp) {
        Ok(o) => Ok(o),
        Err(e) if is_config_error(&e) => return Err(e),
        Err(e) => Err(e.to_string()),
    };
    let wall_clock_seconds = start.elapsed().as_secs_f64();
    let mut result = RunResult {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: exp.kind().into(),
        verdict: false,
        seed: exp.seed().map(|value| SeedProvenance { value, source: seed_source }),
        workers: exp.workers(),
        wall_clock_seconds,
        experiment: exp.clone(),
        report: Value::Null,
        sweeps: Vec::new(),
        error: None,
        table: None,
    };
    match outcome {
        Ok(o) => {
            result.verdict = o.verdict;
            result.report = o.report;
            result.sweeps = o.sweeps;
            result.table = o.table;
        }
        Err(msg) => result.error = Some(msg),
    }
    Ok(result)
}

/// Sweep tables as CSV, one per sweep.
pub fn sweep_csv(s: &Sweep) -> String {
    let mut out = format!("{},{}\n", s.x_label, s.y_label);
    for (x, y) in s.x.iter().zip(&s.y) {
        out.push_str(&format!("{x:e},{y:e}\n"));
    }
    out
}
