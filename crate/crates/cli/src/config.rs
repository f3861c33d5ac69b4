//! Scenario files: TOML with `--set` overrides applied to the parsed tree
//! before it is read into typed sections.

use std::collections::BTreeMap;
use std::path::Path;

use pathflow::flux::{Burgers, FluxModel, ScalarFlux};
use pathflow::network::fixtures;
use pathflow::network::{Junction, Network, NetworkData, PathSpec, Road};
use pathflow::series::PiecewiseConstant;
use pathflow::theta::VacuumRule;
use serde::Deserialize;
use toml::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Counterexample,
    VerifyTv,
    Stability,
    BvPropagation,
    Convergence,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Counterexample => "counterexample",
            Mode::VerifyTv => "verify-tv",
            Mode::Stability => "stability",
            Mode::BvPropagation => "bv-propagation",
            Mode::Convergence => "convergence",
        }
    }

    fn needs_network(&self) -> bool {
        matches!(self, Mode::Simulate | Mode::Stability | Mode::BvPropagation)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Option<Mode>,
    pub horizon: Option<f64>,
    #[serde(default)]
    pub output_times: Vec<f64>,
    pub flux: Option<FluxSection>,
    #[serde(default)]
    pub numerics: Numerics,
    pub network: Option<NetworkSection>,
    #[serde(default)]
    pub roads: Vec<RoadEntry>,
    #[serde(default)]
    pub junctions: Vec<JunctionEntry>,
    #[serde(default)]
    pub paths: Vec<PathEntry>,
    pub data: Option<DataSection>,
    pub counterexample: Option<CounterexampleSection>,
    pub verify_tv: Option<VerifyTvSection>,
    pub stability: Option<StabilitySection>,
    pub convergence: Option<ConvergenceSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FluxSection {
    /// `v = v_max (1 - rho / rho_max)`.
    Lwr { v_max: f64, rho_max: f64 },
    /// `v = sum_i coefficients[i] rho^i`.
    Polynomial {
        coefficients: Vec<f64>,
        rho_max: f64,
        rho_star: Option<f64>,
    },
    Burgers,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub vacuum_rule: VacuumChoice,
    /// Cell-count multipliers for refinement studies; the first one is the
    /// base resolution of the stability experiment.
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
}

fn default_cfl() -> f64 {
    pathflow::godunov::DEFAULT_CFL
}

fn default_resolutions() -> Vec<usize> {
    vec![1, 2]
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            cfl: default_cfl(),
            vacuum_rule: VacuumChoice::default(),
            resolutions: default_resolutions(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VacuumChoice {
    #[default]
    Upwind,
    Zero,
}

impl From<VacuumChoice> for VacuumRule {
    fn from(v: VacuumChoice) -> Self {
        match v {
            VacuumChoice::Upwind => VacuumRule::Upwind,
            VacuumChoice::Zero => VacuumRule::Zero,
        }
    }
}

/// A built-in network in place of explicit roads, junctions and paths.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub fixture: String,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_cells() -> usize {
    50
}

fn default_length() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadEntry {
    pub id: String,
    pub length: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionEntry {
    pub id: String,
    pub incoming: Vec<String>,
    pub outgoing: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEntry {
    pub id: String,
    pub roads: Vec<String>,
}

/// A constant, or a piecewise-constant function given by breakpoints and values.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Pieces { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl Profile {
    pub fn to_series(&self) -> Result<PiecewiseConstant, String> {
        match self {
            Profile::Constant(c) => Ok(PiecewiseConstant::constant(*c)),
            Profile::Pieces { breakpoints, values } => {
                PiecewiseConstant::new(breakpoints.clone(), values.clone()).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Initial density by road; `rho0_default` fills the rest.
    #[serde(default)]
    pub rho0: BTreeMap<String, Profile>,
    pub rho0_default: Option<Profile>,
    /// Initial fractions by path, then road. Missing entries take the
    /// inflow fractions at `t = 0`, renormalized over the paths on the road.
    #[serde(default)]
    pub theta0: BTreeMap<String, BTreeMap<String, Profile>>,
    pub rho_in: Profile,
    pub theta_in: BTreeMap<String, Profile>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSection {
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default = "default_samples")]
    pub samples_per_block: usize,
    pub fv_cells: Option<usize>,
}

fn default_blocks() -> usize {
    6
}

fn default_samples() -> usize {
    2000
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        Self {
            blocks: default_blocks(),
            samples_per_block: default_samples(),
            fv_cells: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryChoice {
    #[default]
    Extrapolate,
    Dirichlet,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyTvSection {
    pub u0: Profile,
    pub alpha: f64,
    pub beta: f64,
    pub xs: Vec<f64>,
    pub dxs: Vec<f64>,
    #[serde(default)]
    pub left: BoundaryChoice,
    #[serde(default)]
    pub right: BoundaryChoice,
    /// Ghost values for Dirichlet ends, as functions of time.
    pub left_value: Option<Profile>,
    pub right_value: Option<Profile>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub path: String,
    pub compensating: String,
    pub start: f64,
    pub height: f64,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub level: u32,
    /// Lattice range of the interpolated flux.
    pub range: [f64; 2],
    pub u0: Profile,
    pub window: [f64; 2],
    pub dxs: Vec<f64>,
}

/// Reads `path` (if any) and applies `key=value` overrides.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let mut tree = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("{}: {}", p.display(), e.message())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    ScenarioConfig::deserialize(Value::Table(tree)).map_err(|e| CliError::Config(e.message().to_string()))
}

/// `a.b.0.c=value`: numeric segments index arrays. The value is read as a
/// TOML value, or as a bare string when it does not parse.
pub fn apply_override(tree: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config(format!("empty segment in override key {key:?}")));
    }
    let (first, rest) = segments.split_first().unwrap();
    if rest.is_empty() {
        tree.insert(first.to_string(), value);
        return Ok(());
    }
    let root = tree
        .entry(first.to_string())
        .or_insert_with(|| Value::Table(toml::Table::new()));
    set_path(root, rest, value).map_err(|e| CliError::Config(format!("{key}: {e}")))
}

fn set_path(node: &mut Value, segments: &[&str], value: Value) -> Result<(), String> {
    let (seg, rest) = segments.split_first().unwrap();
    let child = match node {
        Value::Table(t) if rest.is_empty() => {
            t.insert(seg.to_string(), value);
            return Ok(());
        }
        Value::Table(t) => t
            .entry(seg.to_string())
            .or_insert_with(|| Value::Table(toml::Table::new())),
        Value::Array(a) => {
            let i: usize = seg.parse().map_err(|_| format!("{seg:?} is not an array index"))?;
            let len = a.len();
            let slot = a.get_mut(i).ok_or_else(|| format!("index {i} out of range (length {len})"))?;
            if rest.is_empty() {
                *slot = value;
                return Ok(());
            }
            slot
        }
        _ => return Err(format!("{seg:?} does not name a table or array entry")),
    };
    set_path(child, rest, value)
}

fn series(errs: &mut Vec<String>, what: String, p: &Profile) -> Option<PiecewiseConstant> {
    match p.to_series() {
        Ok(s) => Some(s),
        Err(e) => {
            errs.push(format!("{what}: {e}"));
            None
        }
    }
}

/// The flux of a network scenario; Burgers is only valid for scalar modes.
pub enum ScalarChoice {
    Model(FluxModel),
    Burgers,
}

impl ScalarChoice {
    pub fn as_flux(&self) -> &(dyn ScalarFlux + Sync) {
        match self {
            ScalarChoice::Model(m) => m,
            ScalarChoice::Burgers => &Burgers,
        }
    }
}

impl ScenarioConfig {
    pub fn horizon(&self) -> Result<f64, CliError> {
        self.horizon
            .ok_or_else(|| CliError::Validation(vec!["missing horizon".into()]))
    }

    pub fn scalar_flux(&self) -> Result<ScalarChoice, CliError> {
        match &self.flux {
            None => Err(CliError::Validation(vec!["missing [flux] section".into()])),
            Some(FluxSection::Burgers) => Ok(ScalarChoice::Burgers),
            Some(_) => Ok(ScalarChoice::Model(self.model()?)),
        }
    }

    pub fn model(&self) -> Result<FluxModel, CliError> {
        match &self.flux {
            Some(FluxSection::Lwr { v_max, rho_max }) => Ok(FluxModel::lwr_linear(*v_max, *rho_max)?),
            Some(FluxSection::Polynomial {
                coefficients,
                rho_max,
                rho_star,
            }) => Ok(FluxModel::polynomial(coefficients.clone(), *rho_max, *rho_star)?),
            Some(FluxSection::Burgers) => Err(CliError::Validation(vec![
                "network modes need a traffic flux (kind = \"lwr\" or \"polynomial\")".into(),
            ])),
            None => Err(CliError::Validation(vec!["missing [flux] section".into()])),
        }
    }

    /// The network with every road's cell count multiplied by `factor`.
    pub fn network(&self, factor: usize) -> Result<Network, CliError> {
        let explicit = !self.roads.is_empty() || !self.junctions.is_empty() || !self.paths.is_empty();
        let mut net = match (&self.network, explicit) {
            (Some(_), true) => {
                return Err(CliError::Validation(vec![
                    "give either [network] fixture or explicit roads/junctions/paths, not both".into(),
                ]))
            }
            (Some(n), false) => match n.fixture.as_str() {
                "tree" => fixtures::tree_network(n.cells),
                "split" => fixtures::split_network(n.cells, n.length),
                "pass-through" => fixtures::pass_through_network(n.cells, n.length),
                "two-junction" => fixtures::two_junction_network(n.cells, n.length),
                other => {
                    return Err(CliError::Validation(vec![format!(
                        "unknown network fixture {other:?} (tree, split, pass-through, two-junction)"
                    )]))
                }
            },
            (None, true) => Network {
                roads: self
                    .roads
                    .iter()
                    .map(|r| Road {
                        id: r.id.clone(),
                        length: r.length,
                        n_cells: r.cells,
                    })
                    .collect(),
                junctions: self
                    .junctions
                    .iter()
                    .map(|j| Junction {
                        id: j.id.clone(),
                        incoming: j.incoming.clone(),
                        outgoing: j.outgoing.clone(),
                    })
                    .collect(),
                paths: self
                    .paths
                    .iter()
                    .map(|p| PathSpec {
                        id: p.id.clone(),
                        roads: p.roads.clone(),
                    })
                    .collect(),
            },
            (None, false) => return Err(CliError::Validation(vec!["missing network description".into()])),
        };
        for r in &mut net.roads {
            r.n_cells *= factor;
        }
        Ok(net)
    }

    /// Solver data for `net`, resolving defaults and reporting every bad entry.
    pub fn network_data(&self, net: &Network) -> Result<NetworkData, CliError> {
        let data = self
            .data
            .as_ref()
            .ok_or_else(|| CliError::Validation(vec!["missing [data] section".into()]))?;
        let mut errs = Vec::new();
        let mut out = NetworkData::default();
        if let Some(s) = series(&mut errs, "data.rho_in".into(), &data.rho_in) {
            out.rho_in = s;
        }
        for p in &net.paths {
            match data.theta_in.get(&p.id) {
                Some(prof) => {
                    if let Some(s) = series(&mut errs, format!("data.theta_in.{}", p.id), prof) {
                        out.theta_in.insert(p.id.clone(), s);
                    }
                }
                None => errs.push(format!("data.theta_in: no inflow fraction for path {}", p.id)),
            }
        }
        for id in data.theta_in.keys().filter(|id| net.path_index(id).is_none()) {
            errs.push(format!("data.theta_in: unknown path {id}"));
        }
        for r in &net.roads {
            match data.rho0.get(&r.id).or(data.rho0_default.as_ref()) {
                Some(prof) => {
                    if let Some(s) = series(&mut errs, format!("data.rho0.{}", r.id), prof) {
                        out.rho0.insert(r.id.clone(), s);
                    }
                }
                None => errs.push(format!("data.rho0: no initial density for road {}", r.id)),
            }
        }
        for id in data.rho0.keys().filter(|id| net.road_index(id).is_none()) {
            errs.push(format!("data.rho0: unknown road {id}"));
        }
        for (path, roads) in &data.theta0 {
            if net.path_index(path).is_none() {
                errs.push(format!("data.theta0: unknown path {path}"));
            }
            for road in roads.keys().filter(|id| net.road_index(id).is_none()) {
                errs.push(format!("data.theta0.{path}: unknown road {road}"));
            }
        }
        for r in &net.roads {
            let users: Vec<&PathSpec> = net.paths.iter().filter(|p| p.roads.contains(&r.id)).collect();
            let inflow_total: f64 = users
                .iter()
                .filter_map(|p| out.theta_in.get(&p.id))
                .map(|s| s.eval(0.0))
                .sum();
            for p in &users {
                let given = data.theta0.get(&p.id).and_then(|m| m.get(&r.id));
                let value = match given {
                    Some(prof) => series(&mut errs, format!("data.theta0.{}.{}", p.id, r.id), prof),
                    None => {
                        let own = out.theta_in.get(&p.id).map(|s| s.eval(0.0)).unwrap_or(0.0);
                        let share = if inflow_total > 0.0 {
                            own / inflow_total
                        } else {
                            1.0 / users.len() as f64
                        };
                        Some(PiecewiseConstant::constant(share))
                    }
                };
                if let Some(s) = value {
                    out.theta0.insert((p.id.clone(), r.id.clone()), s);
                }
            }
        }
        if errs.is_empty() {
            Ok(out)
        } else {
            Err(CliError::Validation(errs))
        }
    }

    /// Schema and reference checks for `mode`, then the solver's own
    /// network and data validation.
    pub fn validate_for(&self, mode: Mode) -> Result<(), CliError> {
        let mut errs = Vec::new();
        if let Some(m) = self.mode {
            if m != mode {
                errs.push(format!("config mode {} does not match command {}", m.as_str(), mode.as_str()));
            }
        }
        if !(self.numerics.cfl > 0.0 && self.numerics.cfl <= 1.0) {
            errs.push(format!("numerics.cfl must be in (0, 1], got {}", self.numerics.cfl));
        }
        if self.numerics.resolutions.is_empty() || self.numerics.resolutions.contains(&0) {
            errs.push("numerics.resolutions must be non-empty positive multipliers".into());
        }
        let needs_horizon = !matches!(mode, Mode::Counterexample);
        match self.horizon {
            Some(h) if !(h > 0.0 && h.is_finite()) => errs.push(format!("horizon must be positive, got {h}")),
            None if needs_horizon => errs.push("missing horizon".into()),
            _ => {}
        }
        let section = |present: bool, name: &str, errs: &mut Vec<String>| {
            if !present {
                errs.push(format!("mode {} needs a [{name}] section", mode.as_str()));
            }
        };
        match mode {
            Mode::VerifyTv => section(self.verify_tv.is_some(), "verify_tv", &mut errs),
            Mode::Stability => section(self.stability.is_some(), "stability", &mut errs),
            Mode::Convergence => section(self.convergence.is_some(), "convergence", &mut errs),
            _ => {}
        }
        if !matches!(mode, Mode::Counterexample) && self.flux.is_none() {
            errs.push("missing [flux] section".into());
        }
        if !errs.is_empty() {
            return Err(CliError::Validation(errs));
        }
        if mode.needs_network() {
            let m = self.model()?;
            let net = self.network(1)?;
            let topo = net.validate().map_err(CliError::Validation)?;
            let data = self.network_data(&net)?;
            pathflow::network::validate_data(&net, &topo, &data, &m)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(text: &str) -> toml::Table {
        text.parse().unwrap()
    }

    #[test]
    fn override_sets_nested_and_indexed_entries() {
        let mut t = tree("[numerics]\ncfl = 0.45\n[[roads]]\nid = \"A\"\ncells = 10\n");
        apply_override(&mut t, "numerics.cfl=0.3").unwrap();
        apply_override(&mut t, "roads.0.cells=40").unwrap();
        apply_override(&mut t, "network.fixture=split").unwrap();
        assert_eq!(t["numerics"]["cfl"].as_float(), Some(0.3));
        assert_eq!(t["roads"][0]["cells"].as_integer(), Some(40));
        assert_eq!(t["network"]["fixture"].as_str(), Some("split"));
    }

    #[test]
    fn override_rejects_bad_paths() {
        let mut t = tree("[[roads]]\nid = \"A\"\n");
        assert!(apply_override(&mut t, "roads.3.cells=1").is_err());
        assert!(apply_override(&mut t, "roads.x.cells=1").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
        assert!(apply_override(&mut t, "novalue").is_err());
    }

    #[test]
    fn profiles_accept_constants_and_pieces() {
        let cfg: ScenarioConfig = toml::from_str(
            "[data]\nrho_in = 0.2\nrho0_default = { breakpoints = [0.5], values = [0.1, 0.3] }\n[data.theta_in]\nP = 1.0\n",
        )
        .unwrap();
        let data = cfg.data.unwrap();
        assert_eq!(data.rho_in.to_series().unwrap().eval(3.0), 0.2);
        assert_eq!(data.rho0_default.unwrap().to_series().unwrap().eval(0.7), 0.3);
    }

    #[test]
    fn missing_theta0_takes_normalized_inflow_shares() {
        let cfg: ScenarioConfig = toml::from_str(
            "horizon = 1.0\n[network]\nfixture = \"two-junction\"\ncells = 4\n[data]\nrho_in = 0.2\nrho0_default = 0.1\n[data.theta_in]\nP1 = 0.2\nP2 = 0.3\nP3 = 0.5\n",
        )
        .unwrap();
        let net = cfg.network(1).unwrap();
        let data = cfg.network_data(&net).unwrap();
        for r in &net.roads {
            let users: Vec<_> = net.paths.iter().filter(|p| p.roads.contains(&r.id)).collect();
            let sum: f64 = users
                .iter()
                .map(|p| data.theta0[&(p.id.clone(), r.id.clone())].eval(0.5))
                .sum();
            assert!((sum - 1.0).abs() < 1e-15, "{}: {sum}", r.id);
        }
    }
}
