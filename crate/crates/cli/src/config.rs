//! Run configuration: schema, environment overrides and validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::FRAC_PI_2;
use thermocontact::equilibrium::{corner_angle, solve_equilibrium, EquilibriumSurface};
use thermocontact::flow::{ContactModel, FlowProblem, SplitOrder};
use thermocontact::geometry::Grid;
use thermocontact::params::{select_exponents, PhysicalParams, RegularityExponents};

/// Prefix of environment variables overriding configuration keys. Nested
/// keys are joined by a double underscore, e.g. `TCSIM_TIME__DT=0.005`.
pub const ENV_PREFIX: &str = "TCSIM_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Equilibrium,
    Heat,
    Coupled,
    CornerProbe,
    EpsilonSweep,
    Decay,
}

impl Mode {
    pub fn is_timed(self) -> bool {
        matches!(self, Mode::Heat | Mode::Coupled | Mode::EpsilonSweep | Mode::Decay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExponentChoice {
    Auto { safety: f64 },
    Explicit { eps_minus: f64, eps_plus: f64, alpha: f64 },
}

impl Default for ExponentChoice {
    fn default() -> Self {
        ExponentChoice::Auto { safety: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// Mean fluid height above zero.
    pub mean_height: f64,
    /// Integration steps of the equilibrium profile.
    pub surface_nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 8, ny: 24, mean_height: 0.75, surface_nodes: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { dt: 0.01, t_end: 3.0 }
    }
}

/// A single regularisation value or a sweep list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsChoice {
    Value(f64),
    Sweep(Vec<f64>),
}

impl Default for EpsChoice {
    fn default() -> Self {
        EpsChoice::Value(0.0)
    }
}

impl EpsChoice {
    pub fn values(&self) -> Vec<f64> {
        match self {
            EpsChoice::Value(v) => vec![*v],
            EpsChoice::Sweep(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitChoice {
    HeatFirst,
    MomentumFirst,
}

impl From<SplitChoice> for SplitOrder {
    fn from(s: SplitChoice) -> Self {
        match s {
            SplitChoice::HeatFirst => SplitOrder::HeatFirst,
            SplitChoice::MomentumFirst => SplitOrder::MomentumFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub nonlinear: bool,
    pub convection: bool,
    pub moving_geometry: bool,
    pub split: SplitChoice,
    pub picard_iters: usize,
    /// Cubic coefficient of the contact response.
    pub w3: f64,
    /// Abort threshold for the map Jacobian.
    pub j_min: f64,
    /// Largest contact speed the response law is solved for.
    pub speed_range: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            nonlinear: true,
            convection: true,
            moving_geometry: true,
            split: SplitChoice::HeatFirst,
            picard_iters: 0,
            w3: 0.0,
            j_min: 0.1,
            speed_range: 10.0,
        }
    }
}

/// Amplitude of one shape mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeAmplitude {
    pub mode: u32,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub seed: u64,
    pub eta: Vec<ModeAmplitude>,
    pub u: Vec<ModeAmplitude>,
    pub theta: Vec<ModeAmplitude>,
    /// Number of extra surface and temperature modes with seeded random
    /// amplitudes in [-random_amplitude, random_amplitude].
    pub random_modes: u32,
    pub random_amplitude: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        let one = |a: f64| vec![ModeAmplitude { mode: 2, amplitude: a }];
        Self { seed: 0, eta: one(1e-3), u: one(1e-3), theta: one(1e-3), random_modes: 0, random_amplitude: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    /// Steps between series rows.
    pub cadence: usize,
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: "out".into(), cadence: 1, plots: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    /// Time skipped before fitting.
    pub transient: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self { transient: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CornerConfig {
    /// Opening angle; the equilibrium contact angle when absent.
    pub omega: Option<f64>,
    pub q: Vec<f64>,
    pub levels: Vec<usize>,
    pub eigenvalues: usize,
}

impl Default for CornerConfig {
    fn default() -> Self {
        Self { omega: None, q: vec![1.2, 1.8], levels: vec![16, 32, 64, 128], eigenvalues: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub physical: PhysicalParams,
    pub exponents: ExponentChoice,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub eps: EpsChoice,
    pub flow: FlowConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
    pub decay: DecayConfig,
    pub corner: CornerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Coupled,
            physical: PhysicalParams { ell: 0.5, ..PhysicalParams::default() },
            exponents: ExponentChoice::default(),
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            eps: EpsChoice::default(),
            flow: FlowConfig::default(),
            initial: InitialConfig::default(),
            output: OutputConfig::default(),
            decay: DecayConfig::default(),
            corner: CornerConfig::default(),
        }
    }
}

/// Malformed input, reported with its location when known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ParseError(pub String);

fn json_error(source: &str, e: &serde_json::Error) -> ParseError {
    ParseError(format!("{source}: line {}, column {}: {e}", e.line(), e.column()))
}

fn override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `PREFIX_A__B=value` pairs to the JSON tree. Values are read as
/// JSON when they parse, as strings otherwise.
pub fn apply_overrides<I, K, V>(tree: &mut Value, vars: I) -> Result<(), ParseError>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut pairs: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| k.as_ref().strip_prefix(ENV_PREFIX).map(|rest| (rest.to_string(), v.as_ref().to_string())))
        .collect();
    pairs.sort();
    for (key, raw) in pairs {
        let path: Vec<String> = key.split("__").map(|p| p.to_ascii_lowercase()).collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(ParseError(format!("environment override {ENV_PREFIX}{key}: empty key segment")));
        }
        let mut node = &mut *tree;
        for (depth, seg) in path.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| ParseError(format!("environment override {ENV_PREFIX}{key}: {} is not a table", path[..depth].join("."))))?;
            if depth + 1 == path.len() {
                obj.insert(seg.clone(), override_value(&raw));
                break;
            }
            node = obj.entry(seg.clone()).or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

/// Parses a configuration text, applying overrides before the schema check.
pub fn parse_config<I, K, V>(text: &str, source: &str, vars: I) -> Result<RunConfig, ParseError>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut tree: Value = serde_json::from_str(text).map_err(|e| json_error(source, &e))?;
    if !tree.is_object() {
        return Err(ParseError(format!("{source}: top level must be a table")));
    }
    apply_overrides(&mut tree, vars)?;
    serde_json::from_value(tree).map_err(|e| ParseError(format!("{source}: {e}")))
}

/// Everything the run needs that follows from the configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub surface: EquilibriumSurface,
    pub exponents: RegularityExponents,
    pub problem: FlowProblem,
}

pub fn equilibrium_of(cfg: &RunConfig) -> thermocontact::Result<EquilibriumSurface> {
    solve_equilibrium(&cfg.physical, cfg.grid.mean_height, cfg.grid.surface_nodes, 1e-12)
}

pub fn exponents_for(choice: &ExponentChoice, omega: f64) -> thermocontact::Result<RegularityExponents> {
    match *choice {
        ExponentChoice::Auto { safety } => select_exponents(omega, safety),
        ExponentChoice::Explicit { eps_minus, eps_plus, alpha } => {
            RegularityExponents::explicit(omega, eps_minus, eps_plus, alpha)
        }
    }
}

pub fn setup(cfg: &RunConfig) -> thermocontact::Result<Setup> {
    let surface = equilibrium_of(cfg)?;
    let exponents = exponents_for(&cfg.exponents, corner_angle(&surface))?;
    exponents.validate()?;
    let grid = Grid::new(&surface, cfg.physical.depth, cfg.grid.nx, cfg.grid.ny)?;
    let model = ContactModel::new(cfg.physical.kappa, cfg.flow.w3)?;
    let problem = FlowProblem::new(cfg.physical, model, surface.clone(), grid, cfg.flow.j_min, cfg.flow.speed_range)?;
    Ok(Setup { surface, exponents, problem })
}

/// Every invariant violation of the configuration, without running it.
pub fn validate(cfg: &RunConfig) -> Vec<String> {
    let mut out = cfg.physical.violations();
    let positive = |out: &mut Vec<String>, name: &str, v: f64| {
        if !(v.is_finite() && v > 0.0) {
            out.push(format!("{name} must be positive, got {v}"));
        }
    };
    if cfg.grid.nx < 2 || cfg.grid.ny < 2 {
        out.push(format!("grid needs nx, ny >= 2, got {} x {}", cfg.grid.nx, cfg.grid.ny));
    }
    if cfg.grid.surface_nodes < 4 {
        out.push(format!("grid.surface_nodes must be at least 4, got {}", cfg.grid.surface_nodes));
    }
    if !(cfg.grid.mean_height > 0.0 && cfg.grid.mean_height < cfg.physical.big_l) {
        out.push(format!("grid.mean_height {} outside (0, big_l)", cfg.grid.mean_height));
    }
    if cfg.mode.is_timed() {
        positive(&mut out, "time.dt", cfg.time.dt);
        if !(cfg.time.t_end >= 2.0 * cfg.time.dt) {
            out.push(format!("time.t_end {} must cover at least two steps of {}", cfg.time.t_end, cfg.time.dt));
        }
    }
    let eps = cfg.eps.values();
    if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        out.push(format!("eps values must be nonnegative, got {eps:?}"));
    }
    match (&cfg.eps, cfg.mode) {
        (EpsChoice::Sweep(v), Mode::EpsilonSweep) => {
            if v.len() < 2 {
                out.push("epsilon-sweep needs at least two eps values".into());
            }
            if v.iter().any(|e| *e <= 0.0) {
                out.push("epsilon-sweep values must be positive".into());
            }
            if v.windows(2).any(|w| w[1] >= w[0]) {
                out.push("epsilon-sweep values must be strictly decreasing".into());
            }
        }
        (EpsChoice::Value(_), Mode::EpsilonSweep) => out.push("epsilon-sweep needs a list of eps values".into()),
        (EpsChoice::Sweep(_), _) => out.push("a list of eps values is only allowed in epsilon-sweep mode".into()),
        _ => {}
    }
    if cfg.output.cadence == 0 {
        out.push("output.cadence must be at least 1".into());
    }
    if cfg.output.directory.is_empty() {
        out.push("output.directory must not be empty".into());
    }
    let init = &cfg.initial;
    for (name, list) in [("eta", &init.eta), ("u", &init.u), ("theta", &init.theta)] {
        for m in list.iter() {
            if m.mode == 0 || !m.amplitude.is_finite() {
                out.push(format!("initial.{name}: mode numbers start at 1 and amplitudes are finite, got {m:?}"));
            }
        }
    }
    if !(init.random_amplitude.is_finite() && init.random_amplitude >= 0.0) {
        out.push(format!("initial.random_amplitude must be nonnegative, got {}", init.random_amplitude));
    }
    positive(&mut out, "flow.j_min", cfg.flow.j_min);
    positive(&mut out, "flow.speed_range", cfg.flow.speed_range);
    if cfg.mode == Mode::Decay {
        if !(cfg.decay.transient >= 0.0) {
            out.push(format!("decay.transient must be nonnegative, got {}", cfg.decay.transient));
        }
        let usable = ((cfg.time.t_end - cfg.decay.transient) / (cfg.time.dt * cfg.output.cadence.max(1) as f64)).floor();
        if usable < thermocontact::diagnostics::MIN_FIT_SAMPLES as f64 {
            out.push(format!(
                "decay fit needs {} samples after the transient; t_end, dt and cadence give {usable}",
                thermocontact::diagnostics::MIN_FIT_SAMPLES
            ));
        }
    }
    if cfg.mode == Mode::CornerProbe {
        let c = &cfg.corner;
        if let Some(w) = c.omega {
            if !(w > 0.0 && w < std::f64::consts::PI) {
                out.push(format!("corner.omega {w} outside (0, pi)"));
            }
        }
        if c.q.iter().any(|q| !(*q > 1.0 && *q < 2.0)) {
            out.push(format!("corner.q values must lie in (1, 2), got {:?}", c.q));
        }
        if c.levels.len() < 2 || c.levels.iter().any(|n| *n < 4) || c.levels.windows(2).any(|w| w[1] <= w[0]) {
            out.push(format!("corner.levels needs at least two increasing sizes >= 4, got {:?}", c.levels));
        }
        if c.eigenvalues == 0 {
            out.push("corner.eigenvalues must be at least 1".into());
        }
    }
    if let ExponentChoice::Auto { safety } = cfg.exponents {
        if !(safety > 0.0 && safety < 1.0) {
            out.push(format!("exponents.auto.safety {safety} outside (0, 1)"));
        }
    }
    if !out.is_empty() {
        // later checks need a solvable equilibrium
        if let ExponentChoice::Explicit { .. } = cfg.exponents {
            let omega = cfg.corner.omega.unwrap_or(FRAC_PI_2);
            if let Ok(e) = exponents_for(&cfg.exponents, omega) {
                out.extend(e.violations().into_iter().map(|v| format!("exponent constraint violated: {v}")));
            }
        }
        return out;
    }
    let surface = match equilibrium_of(cfg) {
        Ok(s) => s,
        Err(e) => {
            out.push(format!("equilibrium: {e}"));
            return out;
        }
    };
    let omega = corner_angle(&surface);
    match exponents_for(&cfg.exponents, omega) {
        Ok(e) => out.extend(e.violations().into_iter().map(|v| format!("exponent constraint violated: {v}"))),
        Err(e) => out.push(format!("exponents: {e}")),
    }
    if cfg.mode != Mode::CornerProbe && cfg.mode != Mode::Equilibrium {
        match ContactModel::new(cfg.physical.kappa, cfg.flow.w3).and_then(|m| m.check_monotone(cfg.flow.speed_range)) {
            Ok(()) => {}
            Err(e) => out.push(format!("contact response: {e}")),
        }
        match Grid::new(&surface, cfg.physical.depth, cfg.grid.nx, cfg.grid.ny) {
            Ok(_) => {}
            Err(e) => out.push(format!("grid: {e}")),
        }
    }
    out
}
