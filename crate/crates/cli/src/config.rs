//! Run configuration: a TOML tree validated in full before any computation.
//!
//! Every schema problem is collected, so one pass reports all of them.
//! Keys not listed here are rejected.

use std::collections::{BTreeMap, BTreeSet};

use kpp_core::coefficients::{
    check_kpp, Interpolation, PeriodicField, ReactionModel, TabulatedReaction,
};
use kpp_core::experiments::{
    required_x_max, support_right, Alpha, FloquetSettings, GridConfig, SchemeSettings,
    SteepnessConfig, DOMAIN_SLACK_PERIODS,
};
use kpp_core::floquet::{minimal_speed_with, DispersionData, DispersionOptions};
use kpp_core::fronts::FrontOptions;
use kpp_core::solver::{InitialData, LeftBoundary};
use serde::Serialize;
use toml::{Table, Value};

pub const FORMAT_VERSION: i64 = 1;

/// One periodic coefficient: constant, Fourier series or nodal samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    Fourier { cos: Vec<f64>, sin: Vec<f64> },
    Samples { samples: Vec<f64> },
}

impl FieldSpec {
    fn build(
        &self,
        period: f64,
        resolution: usize,
        interp: Interpolation,
    ) -> kpp_core::Result<PeriodicField> {
        match self {
            Self::Constant(v) => PeriodicField::constant(period, *v, resolution),
            Self::Fourier { cos, sin } => {
                PeriodicField::from_fourier(period, cos, sin, resolution, interp)
            }
            Self::Samples { samples } => PeriodicField::new(period, samples.clone(), interp),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PeriodicLogistic,
    GeneralPeriodic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationConfig {
    #[serde(rename = "C")]
    pub amplitude: f64,
    /// absolute decay rate
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// decay rate as a multiple of the base medium's `lambda*`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_lambda_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub period: f64,
    /// nodes per period for Fourier and constant coefficients
    pub resolution: usize,
    pub interpolation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_hat: Option<FieldSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<FieldSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_nodes: Option<Vec<f64>>,
    /// `table[i][k] = f(i L / nx, u_nodes[k])`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloquetBlock {
    pub n_cell: usize,
    pub tol: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_scan: usize,
}

impl FloquetBlock {
    pub fn options(&self, period: f64) -> DispersionOptions {
        DispersionOptions {
            n_cell: self.n_cell,
            lambda_min: self.lambda_min / period,
            lambda_max: self.lambda_max / period,
            n_scan: self.n_scan,
            tol: self.tol,
        }
    }

    pub fn settings(&self) -> FloquetSettings {
        FloquetSettings {
            n_cell: self.n_cell,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontBlock {
    /// wave speed; `c*` when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub horizon: f64,
    #[serde(flatten)]
    pub options: FrontOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunBlock {
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub checkpoint_dt: f64,
    pub trace_dt: f64,
    pub stations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremBlock {
    pub start_from_front: bool,
    pub alpha: Alpha,
    /// final-distance threshold; 0.02 for theorem1, 0.03 for theorem3 when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_tol: Option<f64>,
    pub shift_ratio_tol: f64,
    pub speed_tol: f64,
    pub inner: f64,
    pub outer: f64,
    pub spreading_tol: f64,
}

/// Initial datum as written in the file: a kind plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitBlock {
    pub kind: String,
    pub params: BTreeMap<String, f64>,
    #[serde(skip)]
    pub datum: InitialData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteepnessBlock {
    pub x_min: f64,
    pub x_max: f64,
    pub cells_per_period: usize,
    pub t_end: f64,
    pub checkpoint_dt: f64,
    pub n_pairs: usize,
    pub n_ordered: usize,
    pub seed: u64,
    pub deadband_rel: f64,
    pub order_tol: f64,
}

impl SteepnessBlock {
    pub fn to_config(&self, scheme: SchemeSettings) -> SteepnessConfig {
        SteepnessConfig {
            grid: GridConfig {
                x_min: self.x_min,
                x_max: self.x_max,
                cells_per_period: self.cells_per_period,
            },
            scheme,
            t_end: self.t_end,
            checkpoint_every: self.checkpoint_dt,
            n_pairs: self.n_pairs,
            n_ordered: self.n_ordered,
            seed: self.seed,
            deadband_rel: self.deadband_rel,
            order_tol: self.order_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// Validated configuration with every default filled in.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub version: i64,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub scheme: SchemeSettings,
    pub floquet: FloquetBlock,
    pub front: FrontBlock,
    pub init: InitBlock,
    pub run: RunBlock,
    pub theorem: TheoremBlock,
    pub steepness: SteepnessBlock,
    pub output: OutputBlock,
    #[serde(skip)]
    pub resolved: Resolved,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Objects built from the configuration during validation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: ReactionModel,
    /// dispersion data of the limiting periodic medium
    pub dispersion: DispersionData,
}

impl RunConfig {
    /// Canonical TOML echo of the configuration; re-parses to the same config.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.0 {
            writeln!(f, "config error: {e}")?;
        }
        Ok(())
    }
}

/// Reads typed values out of the tree, remembering which keys were used.
struct Reader {
    errors: Vec<String>,
    used: BTreeSet<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl Reader {
    fn raw<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a Value> {
        let v = t.get(key);
        if v.is_some() {
            self.used.insert(join(path, key));
        }
        v
    }

    fn table<'a>(&mut self, root: &'a Table, key: &str) -> Option<&'a Table> {
        match self.raw(root, "", key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(format!("{key} must be a table"));
                None
            }
        }
    }

    fn f64_opt(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<f64> {
        let v = self.raw(t?, path, key)?;
        match as_f64(v) {
            Some(f) if f.is_finite() => Some(f),
            _ => {
                self.errors
                    .push(format!("{} must be a finite number", join(path, key)));
                None
            }
        }
    }

    fn f64_or(&mut self, t: Option<&Table>, path: &str, key: &str, default: f64) -> f64 {
        self.f64_opt(t, path, key).unwrap_or(default)
    }

    fn positive(&mut self, t: Option<&Table>, path: &str, key: &str, default: f64) -> f64 {
        match self.f64_opt(t, path, key) {
            Some(v) if v > 0.0 => v,
            Some(v) => {
                self.errors
                    .push(format!("{} must be positive, got {v}", join(path, key)));
                default
            }
            None => default,
        }
    }

    fn usize_opt(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<usize> {
        let v = self.raw(t?, path, key)?;
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => {
                self.errors.push(format!(
                    "{} must be a non-negative integer",
                    join(path, key)
                ));
                None
            }
        }
    }

    fn usize_or(&mut self, t: Option<&Table>, path: &str, key: &str, default: usize) -> usize {
        self.usize_opt(t, path, key).unwrap_or(default)
    }

    fn bool_or(&mut self, t: Option<&Table>, path: &str, key: &str, default: bool) -> bool {
        match t.and_then(|t| self.raw(t, path, key)) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.errors
                    .push(format!("{} must be a boolean", join(path, key)));
                default
            }
        }
    }

    fn str_opt(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<String> {
        match self.raw(t?, path, key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.errors
                    .push(format!("{} must be a string", join(path, key)));
                None
            }
        }
    }

    fn f64_array(&mut self, v: &Value, path: &str) -> Option<Vec<f64>> {
        let arr = match v {
            Value::Array(a) => a,
            _ => {
                self.errors
                    .push(format!("{path} must be an array of numbers"));
                return None;
            }
        };
        let out: Option<Vec<f64>> = arr
            .iter()
            .map(|x| as_f64(x).filter(|f| f.is_finite()))
            .collect();
        if out.is_none() {
            self.errors
                .push(format!("{path} must hold finite numbers only"));
        }
        out
    }

    fn f64_array_at(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<Vec<f64>> {
        let v = self.raw(t?, path, key)?;
        self.f64_array(v, &join(path, key))
    }

    fn field(&mut self, t: Option<&Table>, path: &str, key: &str) -> Option<FieldSpec> {
        let full = join(path, key);
        let v = self.raw(t?, path, key)?;
        if let Some(f) = as_f64(v) {
            return Some(FieldSpec::Constant(f));
        }
        let Value::Table(inner) = v else {
            self.errors.push(format!(
                "{full} must be a number or a table with `cos`/`sin` or `samples`"
            ));
            return None;
        };
        let inner = Some(inner);
        let samples = self.f64_array_at(inner, &full, "samples");
        let cos = self.f64_array_at(inner, &full, "cos");
        let sin = self.f64_array_at(inner, &full, "sin");
        match (samples, cos, sin) {
            (Some(s), None, None) => Some(FieldSpec::Samples { samples: s }),
            (None, c, s) if c.is_some() || s.is_some() => Some(FieldSpec::Fourier {
                cos: c.unwrap_or_default(),
                sin: s.unwrap_or_default(),
            }),
            _ => {
                self.errors.push(format!(
                    "{full} needs either `samples` or Fourier `cos`/`sin` lists"
                ));
                None
            }
        }
    }

    /// Reports every key of the tree that no reader consumed.
    fn unknown_keys(&mut self, t: &Table, path: &str) {
        for (k, v) in t {
            let full = join(path, k);
            if !self.used.contains(&full) {
                self.errors.push(format!("unknown key `{full}`"));
                continue;
            }
            // tables read as a whole carry no unchecked keys
            let opaque = full == "init.params" || full == "theorem.alpha";
            if let (Value::Table(inner), false) = (v, opaque) {
                self.unknown_keys(inner, &full);
            }
        }
    }
}

fn read_model(r: &mut Reader, root: &Table) -> Option<ModelConfig> {
    let Some(t) = r.table(root, "model") else {
        r.errors.push("missing [model] table".into());
        return None;
    };
    let t = Some(t);
    let kind = match r.str_opt(t, "model", "kind").as_deref() {
        Some("periodic_logistic") | None => ModelKind::PeriodicLogistic,
        Some("general_periodic") => ModelKind::GeneralPeriodic,
        Some(other) => {
            r.errors.push(format!(
                "model.kind must be periodic_logistic or general_periodic, got `{other}`"
            ));
            ModelKind::PeriodicLogistic
        }
    };
    let period = r.positive(t, "model", "period", 1.0);
    let resolution = r.usize_or(t, "model", "resolution", 64);
    if resolution < 3 {
        r.errors
            .push(format!("model.resolution must be >= 3, got {resolution}"));
    }
    let interpolation = r
        .str_opt(t, "model", "interpolation")
        .unwrap_or_else(|| "cubic".into());
    if !matches!(interpolation.as_str(), "cubic" | "linear") {
        r.errors.push(format!(
            "model.interpolation must be cubic or linear, got `{interpolation}`"
        ));
    }
    let mu_hat = r.field(t, "model", "mu_hat");
    let kappa = r.field(t, "model", "kappa");
    let u_nodes = r.f64_array_at(t, "model", "u_nodes");
    let table = match t.and_then(|t| r.raw(t, "model", "table")) {
        None => None,
        Some(Value::Array(rows)) => {
            let rows: Option<Vec<Vec<f64>>> = rows
                .iter()
                .enumerate()
                .map(|(i, row)| r.f64_array(row, &format!("model.table[{i}]")))
                .collect();
            rows
        }
        Some(_) => {
            r.errors.push("model.table must be an array of rows".into());
            None
        }
    };
    match kind {
        ModelKind::PeriodicLogistic => {
            if u_nodes.is_some() || table.is_some() {
                r.errors
                    .push("model.u_nodes and model.table belong to kind = general_periodic".into());
            }
        }
        ModelKind::GeneralPeriodic => {
            if mu_hat.is_some() || kappa.is_some() {
                r.errors
                    .push("model.mu_hat and model.kappa belong to kind = periodic_logistic".into());
            }
            if u_nodes.is_none() || table.is_none() {
                r.errors
                    .push("kind = general_periodic needs model.u_nodes and model.table".into());
            }
        }
    }
    let perturbation = match t.and_then(|t| r.raw(t, "model", "perturbation")) {
        None => None,
        Some(Value::Table(p)) => {
            let p = Some(p);
            let amplitude = r.f64_opt(p, "model.perturbation", "C");
            let rho = r.f64_opt(p, "model.perturbation", "rho");
            let rho_lambda_star = r.f64_opt(p, "model.perturbation", "rho_lambda_star");
            if rho.is_some() == rho_lambda_star.is_some() {
                r.errors.push(
                    "model.perturbation needs exactly one of `rho` and `rho_lambda_star`".into(),
                );
            }
            match amplitude {
                Some(c) if c >= 0.0 => Some(PerturbationConfig {
                    amplitude: c,
                    rho,
                    rho_lambda_star,
                }),
                Some(c) => {
                    r.errors
                        .push(format!("model.perturbation.C must be >= 0, got {c}"));
                    None
                }
                None => {
                    r.errors.push("model.perturbation.C is required".into());
                    None
                }
            }
        }
        Some(_) => {
            r.errors.push("model.perturbation must be a table".into());
            None
        }
    };
    Some(ModelConfig {
        kind,
        period,
        resolution,
        interpolation,
        mu_hat: mu_hat
            .or(Some(FieldSpec::Constant(1.0)))
            .filter(|_| kind == ModelKind::PeriodicLogistic),
        kappa: kappa
            .or(Some(FieldSpec::Constant(1.0)))
            .filter(|_| kind == ModelKind::PeriodicLogistic),
        u_nodes,
        table,
        perturbation,
    })
}

fn build_base(m: &ModelConfig) -> kpp_core::Result<ReactionModel> {
    let interp = if m.interpolation == "linear" {
        Interpolation::Linear
    } else {
        Interpolation::Cubic
    };
    match m.kind {
        ModelKind::PeriodicLogistic => {
            let mu = m
                .mu_hat
                .as_ref()
                .expect("logistic model has mu_hat")
                .build(m.period, m.resolution, interp)?;
            let kappa = m.kappa.as_ref().expect("logistic model has kappa").build(
                m.period,
                m.resolution,
                interp,
            )?;
            ReactionModel::logistic(mu, kappa)
        }
        ModelKind::GeneralPeriodic => {
            let table = TabulatedReaction::new(
                m.period,
                m.u_nodes.clone().unwrap_or_default(),
                m.table.clone().unwrap_or_default(),
            )?;
            Ok(ReactionModel::tabulated(table))
        }
    }
}

fn read_init(r: &mut Reader, root: &Table) -> InitBlock {
    let t = r.table(root, "init");
    let kind = r
        .str_opt(t, "init", "kind")
        .unwrap_or_else(|| "bump".into());
    let params = match t.and_then(|t| r.raw(t, "init", "params")) {
        None => None,
        Some(Value::Table(p)) => Some(p),
        Some(_) => {
            r.errors.push("init.params must be a table".into());
            None
        }
    };
    let mut p = |key: &str, default: f64| r.f64_or(params, "init.params", key, default);
    let datum = match kind.as_str() {
        "bump" => InitialData::Bump {
            a: p("a", -1.0),
            b: p("b", 1.0),
            height: p("height", 1.0),
        },
        "exp_tail" => InitialData::ExpTail {
            amplitude: p("amplitude", 1.0),
            rate: p("rate", 1.0),
        },
        "heaviside" => InitialData::Heaviside { a: p("a", 0.0) },
        "zero" => InitialData::Zero,
        other => {
            r.errors.push(format!(
                "init.kind must be bump, exp_tail, heaviside or zero, got `{other}`"
            ));
            InitialData::Zero
        }
    };
    if let Some(params) = params {
        let allowed: &[&str] = match kind.as_str() {
            "bump" => &["a", "b", "height"],
            "exp_tail" => &["amplitude", "rate"],
            "heaviside" => &["a"],
            _ => &[],
        };
        for k in params.keys() {
            if !allowed.contains(&k.as_str()) {
                r.errors.push(format!(
                    "unknown key `init.params.{k}` for init.kind = {kind}"
                ));
            }
        }
    }
    match datum {
        InitialData::Bump { a, b, height } if !(b > a) || !(height > 0.0) => {
            r.errors.push(format!("init.params: bump needs a < b and height > 0 (got a = {a}, b = {b}, height = {height})"));
        }
        InitialData::ExpTail { amplitude, rate } if !(amplitude > 0.0) || !(rate > 0.0) => {
            r.errors
                .push("init.params: exp_tail needs positive amplitude and rate".into());
        }
        _ => {}
    }
    let params = match datum {
        InitialData::Bump { a, b, height } => vec![("a", a), ("b", b), ("height", height)],
        InitialData::ExpTail { amplitude, rate } => vec![("amplitude", amplitude), ("rate", rate)],
        InitialData::Heaviside { a } => vec![("a", a)],
        InitialData::Zero => vec![],
    };
    InitBlock {
        kind,
        params: params
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        datum,
    }
}

fn read_alpha(r: &mut Reader, t: Option<&Table>) -> Alpha {
    match t.and_then(|t| r.raw(t, "theorem", "alpha")) {
        None => Alpha::Sqrt,
        Some(Value::String(s)) if s == "sqrt" => Alpha::Sqrt,
        Some(Value::Table(a)) => match (a.get("kind"), a.get("fraction").and_then(as_f64), a.len())
        {
            (Some(Value::String(k)), Some(f), 2) if k == "linear" && f > 0.0 => {
                Alpha::Linear { fraction: f }
            }
            (Some(Value::String(k)), None, 1) if k == "sqrt" => Alpha::Sqrt,
            _ => {
                r.errors.push("theorem.alpha must be \"sqrt\" or { kind = \"linear\", fraction = <positive> }".into());
                Alpha::Sqrt
            }
        },
        Some(_) => {
            r.errors.push(
                "theorem.alpha must be \"sqrt\" or { kind = \"linear\", fraction = <positive> }"
                    .into(),
            );
            Alpha::Sqrt
        }
    }
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let root: Table =
        toml::from_str(text).map_err(|e| ConfigErrors(vec![format!("not valid TOML: {e}")]))?;
    let mut r = Reader {
        errors: Vec::new(),
        used: BTreeSet::new(),
    };

    let version = match r.raw(&root, "", "version") {
        Some(Value::Integer(v)) => *v,
        Some(_) => {
            r.errors.push("version must be an integer".into());
            -1
        }
        None => {
            r.errors.push(format!(
                "missing `version` (this build reads version = {FORMAT_VERSION})"
            ));
            -1
        }
    };
    if version >= 0 && version != FORMAT_VERSION {
        r.errors.push(format!(
            "unsupported version {version}; this build reads version = {FORMAT_VERSION}"
        ));
    }

    let model = read_model(&mut r, &root);

    let g = r.table(&root, "grid");
    let x_min = r.f64_or(g, "grid", "x_min", -20.0);
    let x_max = r.f64_opt(g, "grid", "x_max");
    let n_points = r.usize_opt(g, "grid", "n");
    let cells = r.usize_opt(g, "grid", "cells_per_period");
    if let Some(xm) = x_max {
        if !(xm > x_min) {
            r.errors.push(format!(
                "grid.x_max must exceed grid.x_min (got {xm} <= {x_min})"
            ));
        }
    }

    let s = r.table(&root, "scheme");
    let dt = r.f64_opt(s, "scheme", "dt");
    if let Some(dt) = dt {
        if !(dt > 0.0) {
            r.errors
                .push(format!("scheme.dt must be positive, got {dt}"));
        }
    }
    let theta = r.f64_or(s, "scheme", "theta", 1.0);
    if !(0.0..=1.0).contains(&theta) {
        r.errors
            .push(format!("scheme.theta must lie in [0, 1], got {theta}"));
    }
    let monotone = r.bool_or(s, "scheme", "monotone", true);
    let boundary_left = match r.str_opt(s, "scheme", "boundary_left").as_deref() {
        None | Some("dirichlet_p") => LeftBoundary::DirichletP,
        Some("neumann_zero") => LeftBoundary::NeumannZero,
        Some(other) => {
            r.errors.push(format!(
                "scheme.boundary_left must be dirichlet_p or neumann_zero, got `{other}`"
            ));
            LeftBoundary::DirichletP
        }
    };
    let scheme = SchemeSettings {
        dt,
        theta,
        boundary_left,
        monotone,
    };

    let f = r.table(&root, "floquet");
    let floquet = FloquetBlock {
        n_cell: r.usize_or(f, "floquet", "n_cell", 256),
        tol: r.positive(f, "floquet", "tol", 1e-8),
        lambda_min: r.positive(f, "floquet", "lambda_min", 1e-3),
        lambda_max: r.positive(f, "floquet", "lambda_max", 20.0),
        n_scan: r.usize_or(f, "floquet", "n_scan", 160),
    };
    if floquet.lambda_max <= floquet.lambda_min {
        r.errors
            .push("floquet.lambda_max must exceed floquet.lambda_min".into());
    }

    let fr = r.table(&root, "front");
    let d = FrontOptions::default();
    let front = FrontBlock {
        c: r.f64_opt(fr, "front", "c"),
        horizon: r.positive(fr, "front", "horizon", 400.0),
        options: FrontOptions {
            cells_per_period: r.usize_or(fr, "front", "cells_per_period", d.cells_per_period),
            n_phase: r.usize_or(fr, "front", "n_phase", d.n_phase),
            tol_front: r.positive(fr, "front", "tol_front", d.tol_front),
            settle_tol: r.positive(fr, "front", "settle_tol", d.settle_tol),
            behind: r.positive(fr, "front", "behind", d.behind),
            ahead: r.positive(fr, "front", "ahead", d.ahead),
            dt_factor: r.positive(fr, "front", "dt_factor", d.dt_factor),
            min_time: r.f64_or(fr, "front", "min_time", d.min_time),
        },
    };

    let init = read_init(&mut r, &root);

    let rb = r.table(&root, "run");
    let run = RunBlock {
        t_end: r.positive(rb, "run", "t_end", 150.0),
        snapshot_dt: r.positive(rb, "run", "snapshot_dt", 10.0),
        checkpoint_dt: r.positive(rb, "run", "checkpoint_dt", 10.0),
        trace_dt: r.positive(rb, "run", "trace_dt", 0.5),
        stations: r.f64_array_at(rb, "run", "stations").unwrap_or_default(),
    };

    let th = r.table(&root, "theorem");
    let theorem = TheoremBlock {
        start_from_front: r.bool_or(th, "theorem", "start_from_front", false),
        alpha: read_alpha(&mut r, th),
        distance_tol: r.f64_opt(th, "theorem", "distance_tol"),
        shift_ratio_tol: r.positive(th, "theorem", "shift_ratio_tol", 0.05),
        speed_tol: r.positive(th, "theorem", "speed_tol", 0.02),
        inner: r.positive(th, "theorem", "inner", 0.9),
        outer: r.positive(th, "theorem", "outer", 1.1),
        spreading_tol: r.positive(th, "theorem", "spreading_tol", 0.02),
    };

    let st = r.table(&root, "steepness");
    let sd = SteepnessConfig::default();
    let steepness = SteepnessBlock {
        x_min: r.f64_or(st, "steepness", "x_min", sd.grid.x_min),
        x_max: r.f64_or(st, "steepness", "x_max", sd.grid.x_max),
        cells_per_period: r.usize_or(
            st,
            "steepness",
            "cells_per_period",
            sd.grid.cells_per_period,
        ),
        t_end: r.positive(st, "steepness", "t_end", sd.t_end),
        checkpoint_dt: r.positive(st, "steepness", "checkpoint_dt", sd.checkpoint_every),
        n_pairs: r.usize_or(st, "steepness", "n_pairs", sd.n_pairs),
        n_ordered: r.usize_or(st, "steepness", "n_ordered", sd.n_ordered),
        seed: r.usize_or(st, "steepness", "seed", sd.seed as usize) as u64,
        deadband_rel: r.positive(st, "steepness", "deadband_rel", sd.deadband_rel),
        order_tol: r.positive(st, "steepness", "order_tol", sd.order_tol),
    };

    let o = r.table(&root, "output");
    let output = OutputBlock {
        dir: r.str_opt(o, "output", "dir"),
    };

    r.unknown_keys(&root, "");
    let Some(model) = model else {
        return Err(ConfigErrors(r.errors));
    };
    if !r.errors.is_empty() {
        return Err(ConfigErrors(r.errors));
    }

    // semantic stage: build the medium and size the domain from c*
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let period = model.period;
    let cells_per_period = match (n_points, cells) {
        (Some(_), Some(_)) => {
            errors.push("give either grid.n or grid.cells_per_period, not both".into());
            64
        }
        (Some(n), None) => match x_max {
            Some(xm) if n >= 2 => {
                let m = period * (n - 1) as f64 / (xm - x_min);
                if (m - m.round()).abs() > 1e-9 * m || m.round() < 1.0 {
                    errors.push(format!(
                        "grid.n = {n} gives dx = {}, which does not divide the period {period}",
                        (xm - x_min) / (n - 1) as f64
                    ));
                }
                m.round().max(1.0) as usize
            }
            _ => {
                errors.push("grid.n needs grid.x_max and n >= 2".into());
                64
            }
        },
        (None, c) => c.unwrap_or(64),
    };
    let base = match build_base(&model) {
        Ok(b) => b,
        Err(e) => return Err(ConfigErrors(vec![format!("model: {e}")])),
    };
    let s_max = match &model.u_nodes {
        Some(u) => u.iter().copied().fold(0.0, f64::max),
        None => (0..model.resolution)
            .map(|j| base.local_capacity(j as f64 * period / model.resolution as f64))
            .fold(0.0, f64::max),
    };
    let s_grid: Vec<f64> = (1..=40).map(|k| k as f64 / 40.0 * s_max).collect();
    let kpp = check_kpp(&base, &s_grid, 64);
    match kpp {
        Ok(rep) if !rep.pass => errors.push(format!(
            "model is not of KPP type: f(x,u)/u fails to decrease (min gap {:.3e})",
            rep.min_gap
        )),
        Err(e) => errors.push(format!("model: {e}")),
        _ => {}
    }
    let dispersion = match base
        .periodic_linearization(floquet.n_cell)
        .and_then(|r| minimal_speed_with(&r, &floquet.options(period)))
    {
        Ok(d) => d,
        Err(e) => {
            errors.push(format!("model: {e}"));
            return Err(ConfigErrors(errors));
        }
    };
    let model_resolved = match &model.perturbation {
        None => base,
        Some(p) => {
            let rho = p
                .rho
                .unwrap_or_else(|| p.rho_lambda_star.unwrap_or(2.0) * dispersion.lambda_star);
            match ReactionModel::close_to_periodic(base, p.amplitude, rho) {
                Ok(m) => m,
                Err(e) => return Err(ConfigErrors(vec![format!("model.perturbation: {e}")])),
            }
        }
    };

    let speed = match init.datum {
        InitialData::ExpTail { rate, .. } if rate < dispersion.lambda_star => {
            warnings.push(format!(
                "init decays at rate {rate} < lambda* = {:.6}; the run selects a speed above c*",
                dispersion.lambda_star
            ));
            dispersion.speed_of(rate).unwrap_or(dispersion.c_star)
        }
        _ => dispersion.c_star,
    };
    if let Some(p) = &model.perturbation {
        let rho = p
            .rho
            .unwrap_or_else(|| p.rho_lambda_star.unwrap_or(2.0) * dispersion.lambda_star);
        if p.amplitude > 0.0 && rho < 2.0 * dispersion.lambda_star {
            warnings.push(format!(
                "perturbation decays at rho = {rho:.6} < 2 lambda* = {:.6}",
                2.0 * dispersion.lambda_star
            ));
        }
    }
    let d = support_right(&init.datum).unwrap_or(0.0).max(0.0);
    // the theorem2 empty region starts at outer c* t, so a wider outer factor needs room
    let outer = theorem.outer.max(1.1);
    let need = required_x_max(d, speed * outer / 1.1, run.t_end, period);
    let slack = DOMAIN_SLACK_PERIODS * period;
    let x_max = match x_max {
        Some(xm) => {
            if xm < need - slack {
                errors.push(format!(
                    "grid.x_max = {xm} is too small for run.t_end = {}: need x_max >= {need:.6} (D + 1.1 c t_end + 10 L with c = {speed:.6})",
                    run.t_end
                ));
            }
            xm
        }
        None => ((need - slack) / period).ceil() * period,
    };
    let grid = GridConfig {
        x_min,
        x_max,
        cells_per_period,
    };
    if let Err(e) = grid.build(period) {
        errors.push(format!("grid: {e}"));
    }
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    Ok(RunConfig {
        version,
        model,
        grid,
        scheme,
        floquet,
        front,
        init,
        run,
        theorem,
        steepness,
        output,
        resolved: Resolved {
            model: model_resolved,
            dispersion,
        },
        warnings,
    })
}
