//! Config-driven pipeline: chain → profile → plan → steps → witness → sandwich.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    check_geometric_condition, check_span_ratio_condition, separation_profile, ConditionReport,
    EstimationOptions, GeometricMode, Provenance, SeparationProfile,
};
use crate::demo::vandermonde_columns;
use crate::distance::{DescentOptions, Method};
use crate::error::{Error, Result};
use crate::machinery::{
    build_index_plan, build_step_sequence, compute_tilde_a, verify_step_inequality, PlanDocument, PlanMode,
    StepReport, StepSequence, TildeA,
};
use crate::report::{attach_routes, sandwich_check, SandwichReport};
use crate::space::{
    make_chain_from_bases, make_coordinate_chain, validate_chain, ErrorSequence, Norm, NormedSpace, SubspaceChain,
};
use crate::witness::{witness_solve, Witness, WitnessMethod};

pub const BUNDLED: &[(&str, &str)] = &[
    ("orthogonal-geometric", include_str!("../scenarios/orthogonal-geometric.json")),
    ("tilted-chain", include_str!("../scenarios/tilted-chain.json")),
];

pub fn bundled_scenario(name: &str) -> Option<ScenarioConfig> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ScenarioConfig::from_json(text).expect("bundled scenarios parse"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub dim: usize,
    pub p: Norm,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChainConfig {
    /// `Y_k = span(e_1..e_k)`, one level per entry of `d`.
    Coordinate,
    Bases {
        bases: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        staircase: Option<Vec<Vec<f64>>>,
    },
    /// Polynomials of degree `< k` sampled on `dim` grid points of `[0, 1]`.
    PolynomialGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    Geometric,
    Explicit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub kind: SequenceKind,
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(rename = "N", default)]
    pub n: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(default = "default_samples")]
    pub sphere_samples: usize,
    #[serde(default = "default_descent_iters")]
    pub descent_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_samples() -> usize {
    4096
}

fn default_descent_iters() -> usize {
    10_000
}

fn default_tol() -> f64 {
    1e-10
}

fn default_c() -> f64 {
    1.0
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            sphere_samples: default_samples(),
            descent_iters: default_descent_iters(),
            tol: default_tol(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub space: SpaceConfig,
    pub chain: ChainConfig,
    pub d: SequenceConfig,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub mode: PlanMode,
    #[serde(default)]
    pub estimation: EstimationConfig,
}

impl ScenarioConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.space.dim == 0 {
            return Err(Error::config("space.dim", "must be positive"));
        }
        if let Some(w) = &self.space.weights {
            if w.len() != self.space.dim {
                return Err(Error::config("space.weights", "length must equal space.dim"));
            }
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::config("c", "must lie in (0, 1]"));
        }
        let n = self.sequence()?.len();
        match &self.chain {
            ChainConfig::Coordinate | ChainConfig::PolynomialGrid => {
                if n >= self.space.dim {
                    return Err(Error::config("d.N", "horizon must be smaller than space.dim"));
                }
            }
            ChainConfig::Bases { bases, .. } => {
                if bases.len() != n {
                    return Err(Error::config(
                        "d.N",
                        format!("d has {n} entries but the chain {} levels", bases.len()),
                    ));
                }
            }
        }
        if self.estimation.sphere_samples == 0 {
            return Err(Error::config("estimation.sphere_samples", "must be positive"));
        }
        if self.estimation.tol.is_nan() || self.estimation.tol <= 0.0 {
            return Err(Error::config("estimation.tol", "must be positive"));
        }
        Ok(())
    }

    pub fn sequence(&self) -> Result<ErrorSequence> {
        let d = &self.d;
        let seq = match d.kind {
            SequenceKind::Geometric => {
                let ratio = d.ratio.ok_or_else(|| Error::config("d.ratio", "required for kind geometric"))?;
                let n = d.n.ok_or_else(|| Error::config("d.N", "required for kind geometric"))?;
                if n == 0 {
                    return Err(Error::config("d.N", "must be positive"));
                }
                ErrorSequence::geometric(ratio, n, self.c).map_err(|e| Error::config("d.ratio", e.to_string()))?
            }
            SequenceKind::Explicit => {
                let values = d
                    .values
                    .clone()
                    .ok_or_else(|| Error::config("d.values", "required for kind explicit"))?;
                if values.is_empty() {
                    return Err(Error::config("d.values", "must not be empty"));
                }
                if let Some(n) = d.n {
                    if n != values.len() {
                        return Err(Error::config("d.N", "must equal the number of values"));
                    }
                }
                ErrorSequence::new(values, self.c).map_err(|e| Error::config("d.values", e.to_string()))?
            }
        };
        Ok(seq)
    }

    pub fn estimation_options(&self, seed: u64) -> EstimationOptions {
        EstimationOptions {
            sphere_samples: self.estimation.sphere_samples,
            descent: DescentOptions {
                max_iters: self.estimation.descent_iters,
                ..DescentOptions::default()
            },
            tol: self.estimation.tol,
            seed,
            ..EstimationOptions::default()
        }
    }

    pub fn build_chain(&self) -> Result<SubspaceChain> {
        let space = NormedSpace::new(self.space.dim, self.space.p, self.space.weights.clone())
            .map_err(|e| Error::config("space", e.to_string()))?;
        let n = self.sequence()?.len();
        let as_vec = |v: &Vec<f64>, path: String| -> Result<DVector<f64>> {
            if v.len() != self.space.dim {
                return Err(Error::config(path, format!("expected {} coordinates", self.space.dim)));
            }
            Ok(DVector::from_column_slice(v))
        };
        let chain = match &self.chain {
            ChainConfig::Coordinate => make_coordinate_chain(&space, n)?,
            ChainConfig::Bases { bases, staircase } => {
                let bases = bases
                    .iter()
                    .enumerate()
                    .map(|(k, b)| {
                        b.iter()
                            .enumerate()
                            .map(|(i, v)| as_vec(v, format!("chain.bases[{k}][{i}]")))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let staircase = staircase
                    .as_ref()
                    .map(|q| {
                        q.iter()
                            .enumerate()
                            .map(|(k, v)| as_vec(v, format!("chain.staircase[{k}]")))
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?;
                make_chain_from_bases(&space, bases, staircase).map_err(|e| Error::config("chain", e.to_string()))?
            }
            ChainConfig::PolynomialGrid => {
                let columns = vandermonde_columns(self.space.dim, n);
                let bases = (1..=n).map(|k| columns[..k].to_vec()).collect();
                make_chain_from_bases(&space, bases, None).map_err(|e| Error::config("chain", e.to_string()))?
            }
        };
        let validation = validate_chain(&chain);
        if let Some(defect) = validation.first_defect() {
            return Err(Error::config("chain", defect.to_string()));
        }
        Ok(chain)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Profile and conditions.
    Analyze,
    /// Adds anchors, steps and `ã`.
    Plan,
    /// Adds the witness.
    Witness,
    /// Adds the sandwich table.
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioStatus {
    Pass,
    BoundViolation,
    /// The literal recursion repeated an anchor, or the witness solver did
    /// not reach its tolerance.
    Stalled,
}

#[derive(Clone, Debug, Serialize)]
pub struct StallInfo {
    pub stall_index: usize,
    pub plan: PlanDocument,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProvenanceBlock {
    pub seed: u64,
    pub norm: Norm,
    pub distance_methods: Vec<Method>,
    pub profile_certified: bool,
    pub estimated_entries: Vec<usize>,
    pub sphere_samples: usize,
    pub amended_j_rule: bool,
    /// Number of levels `N`.
    pub horizon: usize,
    /// Levels with `d_n > 0`, the range the plan runs over.
    pub plan_horizon: usize,
    /// Tails of the separation minima stop at this staircase index.
    pub tail_end: usize,
    pub witness_method: Option<WitnessMethod>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub name: Option<String>,
    pub stage: Stage,
    pub status: ScenarioStatus,
    pub c: f64,
    pub d: Vec<f64>,
    pub profile: SeparationProfile,
    pub conditions: Vec<ConditionReport>,
    pub plan: Option<PlanDocument>,
    pub stall: Option<StallInfo>,
    pub step_check: Option<StepReport>,
    pub tilde_a: Option<TildeA>,
    pub witness: Option<Witness>,
    pub sandwich: Option<SandwichReport>,
    pub provenance: ProvenanceBlock,
    #[serde(skip)]
    pub steps: Option<StepSequence>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn methods_for(norm: Norm, profile: &SeparationProfile) -> Vec<Method> {
    let mut methods = vec![match norm {
        Norm::L2 => Method::Projection,
        Norm::L1 | Norm::LInf => Method::Simplex,
        Norm::Lp(_) => Method::Descent,
    }];
    for e in &profile.entries {
        if let Provenance::Exact { method } = e.provenance {
            methods.push(method);
        } else if let Provenance::Estimated { .. } = e.provenance {
            methods.push(Method::Descent);
        }
    }
    methods.sort_by_key(|m| *m as u8);
    methods.dedup();
    methods
}

/// Runs the pipeline up to `stage`. Deterministic in `(config, seed)`.
pub fn run_scenario(config: &ScenarioConfig, seed: u64, stage: Stage) -> Result<ScenarioReport> {
    config.validate()?;
    let chain = config.build_chain()?;
    let d = config.sequence()?;
    let c = d.c();
    let opts = config.estimation_options(seed);
    let profile = separation_profile(&chain, &opts)?;

    let mut conditions = vec![check_geometric_condition(&d, GeometricMode::Truncated)];
    if d.is_positive() {
        conditions.push(check_span_ratio_condition(
            &chain,
            &d,
            config.estimation.sphere_samples,
            &opts,
        )?);
    }

    let plan_horizon = d.values().iter().take_while(|v| **v > 0.0).count();
    let mut report = ScenarioReport {
        name: config.name.clone(),
        stage,
        status: ScenarioStatus::Pass,
        c,
        d: d.values().to_vec(),
        conditions,
        plan: None,
        stall: None,
        step_check: None,
        tilde_a: None,
        witness: None,
        sandwich: None,
        provenance: ProvenanceBlock {
            seed,
            norm: config.space.p,
            distance_methods: methods_for(config.space.p, &profile),
            profile_certified: profile.is_certified(),
            estimated_entries: profile
                .entries
                .iter()
                .enumerate()
                .filter(|(_, e)| !e.provenance.is_exact())
                .map(|(i, _)| i + 1)
                .collect(),
            sphere_samples: config.estimation.sphere_samples,
            amended_j_rule: true,
            horizon: d.len(),
            plan_horizon,
            tail_end: profile.tail_end,
            witness_method: None,
        },
        profile,
        steps: None,
    };
    if stage == Stage::Analyze {
        return Ok(report);
    }

    if plan_horizon == 0 {
        return Err(Error::HorizonExhausted("d_1 = 0 leaves nothing to plan".into()));
    }
    let d_plan = ErrorSequence::new(d.values()[..plan_horizon].to_vec(), c)?;
    let plan = match build_index_plan(&d_plan, &report.profile, config.mode) {
        Ok(plan) => plan,
        Err(Error::StalledPlan { stall_index, plan }) => {
            report.stall = Some(StallInfo {
                stall_index,
                plan: PlanDocument::new(&plan, None),
            });
            report.plan = Some(PlanDocument::new(&plan, None));
            report.status = ScenarioStatus::Stalled;
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let steps = build_step_sequence(&plan, &d_plan, &report.profile, c)?;
    let step_check = verify_step_inequality(&steps, &report.profile)?;
    let tilde_a = compute_tilde_a(&[(&plan, &report.profile)])?;
    report.plan = Some(PlanDocument::new(&plan, Some(&steps)));
    if !step_check.pass {
        report.status = ScenarioStatus::BoundViolation;
    }
    report.step_check = Some(step_check);
    report.tilde_a = Some(tilde_a.clone());
    report.steps = Some(steps.clone());
    if stage == Stage::Plan {
        return Ok(report);
    }

    if !chain.space().is_euclidean() {
        return Err(Error::config("space.p", "witness construction needs p = 2"));
    }
    let witness = witness_solve(&chain, &steps.targets())?;
    report.provenance.witness_method = Some(witness.method);
    let converged = witness.converged;
    report.witness = Some(witness);
    if !converged {
        report.status = ScenarioStatus::Stalled;
        return Ok(report);
    }
    if stage == Stage::Witness {
        return Ok(report);
    }

    let witness = report.witness.as_ref().expect("witness built above");
    let mut sandwich = sandwich_check(witness, &chain, &d, c, &tilde_a)?;
    attach_routes(&mut sandwich, &plan, &d_plan, &report.profile);
    let routes_ok = sandwich
        .routes
        .iter()
        .all(|r| r.lower_pass && r.upper_pass.unwrap_or(true));
    if !(sandwich.pass && routes_ok) {
        report.status = ScenarioStatus::BoundViolation;
    }
    report.sandwich = Some(sandwich);
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("unknown format `{other}` (expected json|csv|both)")),
        }
    }
}

/// Writes `report.json` and the CSV tables (`profile.csv`, `steps.csv`,
/// `sandwich.csv`, whichever exist) into `dir`.
pub fn write_outputs(report: &ScenarioReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format != OutputFormat::Csv {
        let path = dir.join("report.json");
        fs::write(&path, report.to_json()? + "\n")?;
        written.push(path);
    }
    if format == OutputFormat::Json {
        return Ok(written);
    }

    let path = dir.join("profile.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["n", "a_n", "attained_at", "provenance"])?;
    for (i, e) in report.profile.entries.iter().enumerate() {
        let kind = if e.provenance.is_exact() { "exact" } else { "estimated" };
        w.write_record([
            (i + 1).to_string(),
            format!("{:e}", e.value),
            e.attained_at.to_string(),
            kind.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path);

    if let Some(steps) = &report.steps {
        let path = dir.join("steps.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["j", "z", "e", "anchor"])?;
        for j in 0..steps.len() {
            w.write_record([
                (j + 1).to_string(),
                steps.z[j].to_string(),
                format!("{:e}", steps.e[j]),
                steps.anchor[j].to_string(),
            ])?;
        }
        w.flush()?;
        written.push(path);
    }

    if let Some(sandwich) = &report.sandwich {
        let path = dir.join("sandwich.csv");
        sandwich.write_csv(fs::File::create(&path)?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_geometric_passes_with_unit_constant() {
        let cfg = bundled_scenario("orthogonal-geometric").unwrap();
        let r = run_scenario(&cfg, 42, Stage::Verify).unwrap();
        assert_eq!(r.status, ScenarioStatus::Pass);
        assert_eq!(r.tilde_a.as_ref().unwrap().value, 1.0);
        let s = r.sandwich.as_ref().unwrap();
        assert!(s.rows.iter().all(|row| (row.upper - row.achieved).abs() < 1e-12));
        assert_eq!(s.routes.len(), 6);
        assert!(s.routes.iter().all(|c| c.lower_pass && c.upper_pass == Some(true)));
    }

    #[test]
    fn tilted_chain_constant() {
        let cfg = bundled_scenario("tilted-chain").unwrap();
        let r = run_scenario(&cfg, 42, Stage::Verify).unwrap();
        assert_eq!(r.status, ScenarioStatus::Pass);
        let t = r.tilde_a.as_ref().unwrap().value;
        assert!((t - 2f64.powf(1.5)).abs() < 1e-9);
        assert!((r.profile.a(1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn literal_mode_reports_stall() {
        let mut cfg = bundled_scenario("orthogonal-geometric").unwrap();
        cfg.mode = PlanMode::Literal;
        let r = run_scenario(&cfg, 42, Stage::Verify).unwrap();
        assert_eq!(r.status, ScenarioStatus::Stalled);
        assert!(r.stall.is_some());
        assert!(r.witness.is_none() && r.sandwich.is_none());
    }

    #[test]
    fn config_errors_carry_paths() {
        let bad = r#"{"space": {"dim": 3, "p": 2}, "chain": {"type": "coordinate"},
                      "d": {"kind": "geometric", "ratio": 0.5, "N": 2}, "c": 1.5}"#;
        match ScenarioConfig::from_json(bad) {
            Err(Error::ConfigInvalid { path, .. }) => assert_eq!(path, "c"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"space": {"dim": 3, "p": 2}, "chain": {"type": "coordinate"},
                      "d": {"kind": "geometric", "ratio": "x", "N": 2}}"#;
        match ScenarioConfig::from_json(bad) {
            Err(Error::ConfigInvalid { path, .. }) => assert_eq!(path, "d.ratio"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = r#"{"space": {"dim": 3, "p": 2}, "chain": {"type": "spiral"},
                      "d": {"kind": "geometric", "ratio": 0.5, "N": 2}}"#;
        match ScenarioConfig::from_json(bad) {
            Err(Error::ConfigInvalid { path, .. }) => assert!(path.starts_with("chain"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_zeros_give_zero_rows() {
        let text = r#"{"space": {"dim": 5, "p": 2}, "chain": {"type": "coordinate"},
                       "d": {"kind": "explicit", "values": [1.0, 0.5, 0.0, 0.0]}, "c": 0.5}"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        let r = run_scenario(&cfg, 1, Stage::Verify).unwrap();
        assert_eq!(r.status, ScenarioStatus::Pass);
        let s = r.sandwich.unwrap();
        assert!(s.rows[2].achieved.abs() < 1e-12 && s.rows[3].achieved.abs() < 1e-12);
        assert_eq!(r.provenance.plan_horizon, 2);
    }

    #[test]
    fn sup_norm_verify_is_a_config_error() {
        let text = r#"{"space": {"dim": 4, "p": "inf"}, "chain": {"type": "coordinate"},
                       "d": {"kind": "geometric", "ratio": 0.5, "N": 2},
                       "estimation": {"sphere_samples": 64}}"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        assert!(run_scenario(&cfg, 1, Stage::Plan).is_ok());
        assert!(matches!(
            run_scenario(&cfg, 1, Stage::Verify),
            Err(Error::ConfigInvalid { .. })
        ));
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = bundled_scenario("tilted-chain").unwrap();
        let a = run_scenario(&cfg, 7, Stage::Verify).unwrap().to_json().unwrap();
        let b = run_scenario(&cfg, 7, Stage::Verify).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"provenance\""));
    }
}
