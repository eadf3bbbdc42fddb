//! Bundled pipeline-inspection case study: the AUV model, the two
//! deployment scenarios, and a one-command standard analysis producing the
//! report and CSV series.

use std::collections::BTreeMap;

use crate::check::{
    evaluate_property, resolve_properties, run_experiment, CheckError, CheckOptions, CheckResult,
    Property,
};
use crate::lang::typecheck::Overrides;
use crate::lang::{parse_model, parse_properties, typecheck, ModelError};
use crate::mdp::{compile_with_options, CompileError, CompileOptions, CompiledMdp};
use crate::rat::{format_rational, rational_from_decimal};
use num::{BigRational, One, Signed};
use thiserror::Error;

/// The bundled model and property files (also shipped under `models/`).
pub const AUV_MODEL: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/auv.pfm"));
pub const AUV_PROPS: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/auv.props"));

const NORTH_SEA_KV: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/north_sea.kv"));
const CARIBBEAN_KV: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/caribbean.kv"));

#[derive(Debug, Error)]
pub enum AuvError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("scenario file line {line}: {message}")]
    Kv { line: usize, message: String },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Compile(#[from] CompileError),

    #[error(transparent)]
    Check(#[from] CheckError),

    #[error("property `{0}` missing from the bundled property file")]
    MissingProperty(String),
}

/// Deployment parameters of one mission.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Minimum water visibility in 0.5-meter units.
    pub min_visib: i64,
    /// Maximum water visibility in 0.5-meter units.
    pub max_visib: i64,
    /// Per-step probability that currents reduce visibility.
    pub current_prob: BigRational,
    /// Pipeline length to inspect, in 0.5-meter units.
    pub inspect: i64,
    /// Bound on the influence of recent thruster failures.
    pub infl_tf: i64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), AuvError> {
        if !(0 < self.min_visib && self.min_visib < self.max_visib) {
            return Err(AuvError::InvalidScenario(format!(
                "need 0 < min_visib < max_visib, got {} and {}",
                self.min_visib, self.max_visib
            )));
        }
        if self.current_prob.is_negative() || self.current_prob > BigRational::one() {
            return Err(AuvError::InvalidScenario(format!(
                "current_prob must lie in [0, 1], got {}",
                format_rational(&self.current_prob)
            )));
        }
        if self.inspect < 1 {
            return Err(AuvError::InvalidScenario(format!(
                "inspect must be at least 1, got {}",
                self.inspect
            )));
        }
        if self.infl_tf < 1 {
            return Err(AuvError::InvalidScenario(format!(
                "infl_tf must be at least 1, got {}",
                self.infl_tf
            )));
        }
        Ok(())
    }
}

/// The two bundled deployments (parsed from `scenarios/*.kv`).
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    match name {
        "north_sea" => Some(scenario_from_kv(NORTH_SEA_KV).expect("bundled scenario parses")),
        "caribbean" => Some(scenario_from_kv(CARIBBEAN_KV).expect("bundled scenario parses")),
        _ => None,
    }
}

pub fn builtin_scenario_names() -> &'static [&'static str] {
    &["north_sea", "caribbean"]
}

/// Parses a `key = value` scenario file (`#` comments, blank lines).
pub fn scenario_from_kv(text: &str) -> Result<Scenario, AuvError> {
    let pairs = parse_kv(text)?;
    let mut name = "custom".to_string();
    let mut min_visib = None;
    let mut max_visib = None;
    let mut current_prob = None;
    let mut inspect = None;
    let mut infl_tf = 2i64;
    for (line, key, value) in pairs {
        let int = |v: &str| -> Result<i64, AuvError> {
            v.parse().map_err(|_| AuvError::Kv {
                line,
                message: format!("`{key}` expects an integer, got `{v}`"),
            })
        };
        match key.as_str() {
            "name" => name = value,
            "min_visib" => min_visib = Some(int(&value)?),
            "max_visib" => max_visib = Some(int(&value)?),
            "inspect" => inspect = Some(int(&value)?),
            "infl_tf" => infl_tf = int(&value)?,
            "current_prob" => {
                current_prob =
                    Some(rational_from_decimal(&value).ok_or_else(|| AuvError::Kv {
                        line,
                        message: format!("`current_prob` expects a decimal, got `{value}`"),
                    })?)
            }
            other => {
                return Err(AuvError::Kv {
                    line,
                    message: format!("unknown scenario key `{other}`"),
                })
            }
        }
    }
    let missing = |what: &str| AuvError::Kv { line: 0, message: format!("missing key `{what}`") };
    let scenario = Scenario {
        name,
        min_visib: min_visib.ok_or_else(|| missing("min_visib"))?,
        max_visib: max_visib.ok_or_else(|| missing("max_visib"))?,
        current_prob: current_prob.ok_or_else(|| missing("current_prob"))?,
        inspect: inspect.ok_or_else(|| missing("inspect"))?,
        infl_tf,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Parses a `key = value` override file into a constant-override map.
pub fn overrides_from_kv(text: &str) -> Result<Overrides, AuvError> {
    let mut out = Overrides::new();
    for (_, key, value) in parse_kv(text)? {
        out.insert(key, value);
    }
    Ok(out)
}

fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>, AuvError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(AuvError::Kv {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        out.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// The bundled model text plus the constant overrides a scenario induces.
pub fn build_scenario(scenario: &Scenario) -> Result<(String, Overrides), AuvError> {
    scenario.validate()?;
    let mut overrides = Overrides::new();
    overrides.insert("min_visib".into(), scenario.min_visib.to_string());
    overrides.insert("max_visib".into(), scenario.max_visib.to_string());
    overrides.insert(
        "current_prob".into(),
        format!("{}/{}", scenario.current_prob.numer(), scenario.current_prob.denom()),
    );
    overrides.insert("inspect".into(), scenario.inspect.to_string());
    overrides.insert("infl_tf".into(), scenario.infl_tf.to_string());
    Ok((AUV_MODEL.to_string(), overrides))
}

/// Compiles the bundled model for a scenario, with optional extra constant
/// overrides (e.g. a sidecar file with vehicle-specific probabilities).
pub fn compile_scenario(
    scenario: &Scenario,
    extra_overrides: &Overrides,
) -> Result<(crate::lang::TypedModel, CompiledMdp), AuvError> {
    compile_scenario_with_cap(scenario, extra_overrides, &CompileOptions::default())
}

pub fn compile_scenario_with_cap(
    scenario: &Scenario,
    extra_overrides: &Overrides,
    options: &CompileOptions,
) -> Result<(crate::lang::TypedModel, CompiledMdp), AuvError> {
    let (text, mut overrides) = build_scenario(scenario)?;
    for (k, v) in extra_overrides {
        overrides.insert(k.clone(), v.clone());
    }
    let ast = parse_model(&text)?;
    let model = typecheck(&ast, &overrides)?;
    let mdp = compile_with_options(&model, options)?;
    Ok((model, mdp))
}

/// Everything the standard analysis produces for one scenario.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub scenario: String,
    pub states: usize,
    pub pmin_done: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    pub time_min: f64,
    pub time_max: f64,
    pub pmin_g_safe: f64,
    /// filter(min, Pmin[F<=k "safe"], "unsafe") for k = 0..=10.
    pub recovery_series: Vec<(i64, f64)>,
    /// filter(max, Pmax[F<=k "unsafe"], "safe") for k = 0..=100.
    pub unsafe_max_series: Vec<(i64, f64)>,
    /// filter(avg, Pmax[F<=k "unsafe"], "safe") for k = 0..=100.
    pub unsafe_avg_series: Vec<(i64, f64)>,
}

const RECOVERY_SWEEP_TO: i64 = 10;
const UNSAFE_SWEEP_TO: i64 = 100;

fn find_property<'a>(props: &'a [Property], display: &str) -> Result<&'a Property, AuvError> {
    props
        .iter()
        .find(|p| p.display == display)
        .ok_or_else(|| AuvError::MissingProperty(display.to_string()))
}

/// Runs the full bundled analysis: mission completion, energy/time
/// envelopes, invariant safety, and the two bounded-safety experiment
/// sweeps.
pub fn run_standard_analysis(
    scenario: &Scenario,
    extra_overrides: &Overrides,
    options: &CheckOptions,
) -> Result<AnalysisReport, AuvError> {
    let (model, mdp) = compile_scenario(scenario, extra_overrides)?;
    let props_ast = parse_properties(AUV_PROPS)?;
    let props = resolve_properties(&model, &props_ast)?;
    let no_bindings = BTreeMap::new();

    let scalar = |display: &str| -> Result<f64, AuvError> {
        let p = find_property(&props, display)?;
        let r = evaluate_property(&mdp, p, &no_bindings, options)?;
        Ok(r.scalar().expect("non-experiment property"))
    };
    let sweep = |display: &str, to: i64| -> Result<Vec<(i64, f64)>, AuvError> {
        let p = find_property(&props, display)?;
        match run_experiment(&mdp, p, "k", 0, to, 1, options)? {
            CheckResult::Series(series) => Ok(series),
            CheckResult::Scalar(_) => unreachable!("experiments yield series"),
        }
    };

    Ok(AnalysisReport {
        scenario: scenario.name.clone(),
        states: mdp.num_states(),
        pmin_done: scalar("Pmin=? [F s=done]")?,
        energy_min: scalar("R{\"energy\"}min=? [F s=done]")?,
        energy_max: scalar("R{\"energy\"}max=? [F s=done]")?,
        time_min: scalar("R{\"time\"}min=? [F s=done]")?,
        time_max: scalar("R{\"time\"}max=? [F s=done]")?,
        pmin_g_safe: scalar("Pmin=? [G \"safe\"]")?,
        recovery_series: sweep("filter(min, Pmin=? [F<=k \"safe\"], \"unsafe\")", RECOVERY_SWEEP_TO)?,
        unsafe_max_series: sweep("filter(max, Pmax=? [F<=k \"unsafe\"], \"safe\")", UNSAFE_SWEEP_TO)?,
        unsafe_avg_series: sweep("filter(avg, Pmax=? [F<=k \"unsafe\"], \"safe\")", UNSAFE_SWEEP_TO)?,
    })
}

impl AnalysisReport {
    pub fn text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "scenario = {}", self.scenario);
        let _ = writeln!(out, "states = {}", self.states);
        let _ = writeln!(out, "Pmin=? [F s=done] = {:?}", self.pmin_done);
        let _ = writeln!(out, "R{{\"energy\"}}min=? [F s=done] = {:?}", self.energy_min);
        let _ = writeln!(out, "R{{\"energy\"}}max=? [F s=done] = {:?}", self.energy_max);
        let _ = writeln!(out, "R{{\"time\"}}min=? [F s=done] = {:?}", self.time_min);
        let _ = writeln!(out, "R{{\"time\"}}max=? [F s=done] = {:?}", self.time_max);
        let _ = writeln!(out, "Pmin=? [G \"safe\"] = {:?}", self.pmin_g_safe);
        for (k, v) in &self.recovery_series {
            let _ = writeln!(out, "filter(min, Pmin=? [F<={k} \"safe\"], \"unsafe\") = {v:?}");
        }
        out
    }

    /// `k,max,avg` rows of the two unsafe-entry sweeps.
    pub fn fig6_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("k,max,avg\n");
        for ((k, max), (_, avg)) in self.unsafe_max_series.iter().zip(&self.unsafe_avg_series) {
            let _ = writeln!(out, "{k},{max:?},{avg:?}");
        }
        out
    }
}

/// `scenario,energy_min,energy_max,time_min,time_max` rows.
pub fn table2_csv(reports: &[AnalysisReport]) -> String {
    use std::fmt::Write;
    let mut out = String::from("scenario,energy_min,energy_max,time_min,time_max\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?}",
            r.scenario, r.energy_min, r.energy_max, r.time_min, r.time_max
        );
    }
    out
}
