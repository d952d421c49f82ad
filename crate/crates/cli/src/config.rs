//! Run configurations. Parsing rejects unknown keys and `validate` checks
//! ranges, so a config that loads is one the experiments accept.

use pathlift::cylinder::CylinderFunction;
use pathlift::ibp::{AdaptedCheck, Convention, IbpCheck, McSettings};
use pathlift::oracle::{GeodesicOracle, OracleMethod};
use pathlift::submersion::{BaseField, SubmersionCase};
use pathlift::{Manifold, VectorField};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub dir: Option<String>,
    /// File stem shared by every output file.
    #[serde(default = "default_stem")]
    pub stem: String,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub plots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: None, stem: default_stem(), csv: true, plots: true }
    }
}

fn default_stem() -> String {
    "result".into()
}

fn yes() -> bool {
    true
}

fn default_kernel_steps() -> usize {
    1000
}

fn default_rk4_levels() -> Vec<usize> {
    vec![4, 8, 16, 32]
}

fn default_min_order() -> f64 {
    0.8
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    /// Damped transport bounds along developed Brownian paths.
    DevelopCheck(DevelopCheck),
    /// Endpoint and ODE-form consistency of the orthogonal lift.
    LiftCheck(LiftCheck),
    Ibp(IbpCheck),
    AdaptedIbp(AdaptedCheck),
    /// Geodesic-chain oracle over one or more fields, with sign selection.
    OracleIbp(OracleIbp),
    Submersion(Submersion),
    CmKernelSuite(CmKernelSuite),
    HeatMoment(HeatMoment),
    WeakOrder(WeakOrder),
    Invariants(Invariants),
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DevelopCheck {
    pub manifold: Manifold,
    pub n_steps: usize,
    pub mc: McSettings,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LiftCheck {
    pub manifold: Manifold,
    pub field: VectorField,
    /// Grid sizes, coarsest first; each must divide the next.
    pub levels: Vec<usize>,
    pub mc: McSettings,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OracleIbp {
    pub manifold: Manifold,
    pub n_small: usize,
    pub fields: Vec<VectorField>,
    pub f: CylinderFunction,
    pub g: CylinderFunction,
    #[serde(default)]
    pub method: OracleMethod,
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Fail unless the fitted convention equals this one.
    #[serde(default)]
    pub expect: Option<Convention>,
}

impl OracleIbp {
    pub fn runs(&self) -> Vec<GeodesicOracle> {
        self.fields
            .iter()
            .map(|field| GeodesicOracle {
                manifold: self.manifold,
                n_small: self.n_small,
                field: field.clone(),
                f: self.f.clone(),
                g: self.g.clone(),
                method: self.method,
                tolerance: self.tolerance.unwrap_or(1e-4),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Submersion {
    pub case: SubmersionCase,
    pub field: BaseField,
    pub n_points: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CmKernelSuite {
    #[serde(default = "default_kernel_steps")]
    pub n_steps: usize,
    pub dim: usize,
    pub cases: usize,
    pub competitors: usize,
    pub seed: u64,
    #[serde(default = "default_rk4_levels")]
    pub rk4_levels: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct HeatMoment {
    pub n_steps: usize,
    pub mc: McSettings,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct WeakOrder {
    pub levels: Vec<usize>,
    pub mc: McSettings,
    #[serde(default = "default_min_order")]
    pub min_order: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Invariants {
    pub manifold: Manifold,
    pub field: VectorField,
    pub f: CylinderFunction,
    pub g: CylinderFunction,
    pub n_steps: usize,
    pub mc: McSettings,
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::DevelopCheck(_) => "develop-check",
            Experiment::LiftCheck(_) => "lift-check",
            Experiment::Ibp(_) => "ibp",
            Experiment::AdaptedIbp(_) => "adapted-ibp",
            Experiment::OracleIbp(_) => "oracle-ibp",
            Experiment::Submersion(_) => "submersion",
            Experiment::CmKernelSuite(_) => "cm-kernel-suite",
            Experiment::HeatMoment(_) => "heat-moment",
            Experiment::WeakOrder(_) => "weak-order",
            Experiment::Invariants(_) => "invariants",
        }
    }

    fn mc_mut(&mut self) -> Option<&mut McSettings> {
        match self {
            Experiment::DevelopCheck(c) => Some(&mut c.mc),
            Experiment::LiftCheck(c) => Some(&mut c.mc),
            Experiment::Ibp(c) => Some(&mut c.mc),
            Experiment::AdaptedIbp(c) => Some(&mut c.mc),
            Experiment::HeatMoment(c) => Some(&mut c.mc),
            Experiment::WeakOrder(c) => Some(&mut c.mc),
            Experiment::Invariants(c) => Some(&mut c.mc),
            Experiment::OracleIbp(_) | Experiment::Submersion(_) | Experiment::CmKernelSuite(_) => None,
        }
    }

    /// The seed that drives the run, if the experiment is random.
    pub fn seed_mut(&mut self) -> Option<&mut u64> {
        match self {
            Experiment::Submersion(c) => Some(&mut c.seed),
            Experiment::CmKernelSuite(c) => Some(&mut c.seed),
            Experiment::OracleIbp(c) => match &mut c.method {
                OracleMethod::MonteCarlo { seed, .. } => Some(seed),
                OracleMethod::Quadrature { .. } => None,
            },
            other => other.mc_mut().map(|mc| &mut mc.seed),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        self.clone().seed_mut().map(|s| *s)
    }

    pub fn set_workers(&mut self, k: usize) {
        if let Some(mc) = self.mc_mut() {
            mc.workers = Some(k);
        }
    }

    pub fn workers(&self) -> Option<usize> {
        self.clone().mc_mut().and_then(|mc| mc.workers)
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn check_mc(mc: &McSettings) -> Result<(), String> {
    check(mc.n_paths >= 2, || format!("mc.n_paths must be at least 2, got {}", mc.n_paths))?;
    check(mc.workers != Some(0), || "mc.workers must be positive".into())
}

fn check_steps(n: usize) -> Result<(), String> {
    check(n >= 1, || "n_steps must be positive".into())
}

fn check_pair(m: &Manifold, f: &CylinderFunction, g: &CylinderFunction) -> Result<(), String> {
    f.validate(m).map_err(|e| format!("f: {e}"))?;
    g.validate(m).map_err(|e| format!("g: {e}"))
}

fn check_field(m: &Manifold, x: &VectorField) -> Result<(), String> {
    x.check(m).map_err(|e| e.to_string())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range and compatibility checks that the schema cannot express.
    pub fn validate(&self) -> Result<(), String> {
        let stem = &self.output.stem;
        check(!stem.is_empty() && !stem.contains(['/', '\\']), || format!("output.stem `{stem}` is not a plain file name"))?;
        match &self.experiment {
            Experiment::DevelopCheck(c) => {
                check_steps(c.n_steps)?;
                check_mc(&c.mc)
            }
            Experiment::LiftCheck(c) => {
                check_mc(&c.mc)?;
                check_field(&c.manifold, &c.field)?;
                check(c.levels.len() >= 2, || "lift-check needs at least two levels".into())?;
                check(c.levels.windows(2).all(|w| w[0] >= 1 && w[1] % w[0] == 0 && w[1] > w[0]), || {
                    "levels must increase and each must divide the next".into()
                })
            }
            Experiment::Ibp(c) => {
                check_steps(c.n_steps)?;
                check_mc(&c.mc)?;
                check_field(&c.manifold, &c.field)?;
                check_pair(&c.manifold, &c.f, &c.g)?;
                c.convention.validate().map_err(|e| e.to_string())?;
                check(c.bias_allowance.is_none_or(|b| b >= 0.0), || "bias_allowance must be nonnegative".into())
            }
            Experiment::AdaptedIbp(c) => {
                check_steps(c.n_steps)?;
                check_mc(&c.mc)?;
                check_pair(&c.manifold, &c.f, &c.g)?;
                check(c.direction < c.manifold.dim(), || format!("direction {} out of range for {}", c.direction, c.manifold.name()))?;
                check(c.oracle_tolerance >= 0.0, || "oracle_tolerance must be nonnegative".into())
            }
            Experiment::OracleIbp(c) => {
                check(!c.fields.is_empty(), || "oracle-ibp needs at least one field".into())?;
                check((1..=3).contains(&c.n_small), || format!("n_small must be 1, 2 or 3, got {}", c.n_small))?;
                check_pair(&c.manifold, &c.f, &c.g)?;
                for x in &c.fields {
                    check_field(&c.manifold, x)?;
                }
                if let Some(e) = &c.expect {
                    e.validate().map_err(|e| e.to_string())?;
                }
                check(c.tolerance.is_none_or(|t| t > 0.0), || "tolerance must be positive".into())
            }
            Experiment::Submersion(c) => check(c.n_points >= 1, || "n_points must be positive".into()),
            Experiment::CmKernelSuite(c) => {
                check_steps(c.n_steps)?;
                check(c.dim >= 1 && c.cases >= 1 && c.competitors >= 1, || "dim, cases and competitors must be positive".into())?;
                check(c.rk4_levels.len() >= 2 && c.rk4_levels.iter().all(|&n| n >= 1), || "rk4_levels needs two positive entries".into())
            }
            Experiment::HeatMoment(c) => {
                check_steps(c.n_steps)?;
                check_mc(&c.mc)
            }
            Experiment::WeakOrder(c) => {
                check_mc(&c.mc)?;
                check(c.levels.len() >= 2 && c.levels.iter().all(|&n| n >= 1), || "weak-order needs two positive levels".into())
            }
            Experiment::Invariants(c) => {
                check_steps(c.n_steps)?;
                check_mc(&c.mc)?;
                check_field(&c.manifold, &c.field)?;
                check_pair(&c.manifold, &c.f, &c.g)
            }
        }
    }
}

/// The JSON schema of [`RunConfig`], as shipped in the docs.
pub fn schema() -> String {
    let schema = schemars::schema_for!(RunConfig);
    serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    const IBP: &str = r#"{
        "experiment": {
            "kind": "ibp",
            "manifold": {"kind": "euclidean", "dim": 2},
            "n_steps": 10,
            "mc": {"n_paths": 100, "seed": 1},
            "field": {"kind": "identity"},
            "f": {"terms": [{"coeff": 1.0, "factors": [{"time": 1.0, "c": [1.0, 0.0], "profile": "sin"}]}]},
            "g": {"terms": [{"coeff": 1.0, "factors": []}]}
        }
    }"#;

    #[test]
    fn parses_and_defaults() {
        let cfg = RunConfig::from_json(IBP).unwrap();
        assert_eq!(cfg.experiment.kind(), "ibp");
        assert_eq!(cfg.output.stem, "result");
        assert_eq!(cfg.experiment.seed(), Some(1));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = IBP.replace("\"n_steps\": 10", "\"n_steps\": 10, \"n_stpes\": 3");
        assert!(RunConfig::from_json(&bad).unwrap_err().contains("n_stpes"));
        let bad = IBP.replacen("{", "{\"extra\": 1,", 1);
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn ranges_checked() {
        assert!(RunConfig::from_json(&IBP.replace("\"n_paths\": 100", "\"n_paths\": 1")).is_err());
        assert!(RunConfig::from_json(&IBP.replace("\"identity\"", "\"rotational\", \"k\": [0, 0, 1]")).is_err());
        assert!(RunConfig::from_json(&IBP.replace("[1.0, 0.0]", "[1.0]")).is_err());
    }

    #[test]
    fn overrides_reach_the_settings() {
        let mut cfg = RunConfig::from_json(IBP).unwrap();
        *cfg.experiment.seed_mut().unwrap() = 9;
        cfg.experiment.set_workers(3);
        assert_eq!(cfg.experiment.seed(), Some(9));
        assert_eq!(cfg.experiment.workers(), Some(3));
    }
}
