//! JSON run configuration: schema, per-study defaults, and construction of
//! the library objects. Every error names the offending field.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boundary::{Cylinder, TestFunction};
use crate::branching::{BranchingLaw, Mode, OffspringPmf, Overrides};
use crate::error::{BmcError, Result};
use crate::lab::{
    BoundaryParams, DisappearParams, Experiment, GreenParams, GwParams, InequalityParams, MartingaleParams, PositivityParams,
};
use crate::population::Population;
use crate::rng::derive_seed;
use crate::state_space::{StateSpace, StepLaw, Vertex};

/// Studies and tools a configuration can drive.
pub const STUDIES: &[&str] = &[
    "simulate",
    "martingale",
    "positivity",
    "boundary",
    "disappear",
    "gw",
    "green",
    "inequalities",
    "check",
    "boundary-table",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub state_space: SpaceConfig,
    pub branching: BranchingConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Used when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceConfig {
    Tree {
        degree: u8,
        #[serde(default)]
        step_law: StepLawConfig,
    },
    FreeGroup {
        rank: u8,
        #[serde(default)]
        step_law: StepLawConfig,
    },
    Explicit {
        states: Vec<String>,
        matrix: Vec<Vec<f64>>,
    },
    /// Distance-from-root chain of an isotropic tree walk.
    TreeRadial {
        degree: u8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        down: Option<f64>,
    },
    Singleton,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimpleTag {
    Simple,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepLawConfig {
    Simple(SimpleTag),
    Weights(Vec<f64>),
    TowardRoot { toward_root: f64 },
}

impl Default for StepLawConfig {
    fn default() -> Self {
        StepLawConfig::Simple(SimpleTag::Simple)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    #[default]
    Independent,
    VertexCoupled,
    Mixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingConfig {
    #[serde(default)]
    pub mode: ModeConfig,
    /// Probability of the independent mode in a mixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub offspring: OffspringConfig,
    #[serde(default)]
    pub overrides: Vec<OverrideConfig>,
    /// Declared constant branching ratio, checked against every law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffspringConfig {
    Delta { k: u64 },
    Geometric { q: f64 },
    Explicit { support: Vec<u64>, probs: Vec<f64> },
    HeavyTail {
        mean: f64,
        #[serde(default = "default_k0")]
        k0: u64,
        #[serde(default = "default_k_max")]
        k_max: u64,
    },
}

fn default_k0() -> u64 {
    2
}

fn default_k_max() -> u64 {
    1 << 32
}

/// Either a distance band `from..=to` or a single named state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    pub offspring: OffspringConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionConfig {
    /// `(anchor word, coefficient)` pairs.
    #[serde(default)]
    pub cylinders: Vec<(String, f64)>,
    #[serde(default)]
    pub constant: f64,
}

/// Everything is optional on input; [`RunConfig::resolve`] fills the
/// defaults of the chosen study so the echoed config is complete.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<(String, u64)>>,
    /// A list expands into one run per value, with derived seeds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<OneOrMany<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<OneOrMany<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub watched: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_steps: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunctionConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_truncated: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiples: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_band: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cauchy_band: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green_radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(String, String)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_range: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub populations: Option<Vec<Vec<(String, u64)>>>,
}

/// Parse JSON, reporting the path of the first offending field.
pub fn parse(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        // serde reports a missing field at its parent; name the field itself.
        let missing = message.strip_prefix("missing field `").and_then(|m| m.split('`').next());
        let field = match (path.as_str(), missing) {
            (".", Some(m)) => m.to_string(),
            (".", None) => "config".to_string(),
            (p, Some(m)) => format!("{p}.{m}"),
            (p, None) => p.to_string(),
        };
        BmcError::config(field, message)
    })
}

pub fn load(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BmcError::config("--config", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// The configuration used when no file is given.
pub fn default_config(study: &str) -> RunConfig {
    let t3 = SpaceConfig::Tree { degree: 3, step_law: StepLawConfig::default() };
    let state_space = match study {
        "gw" => SpaceConfig::Singleton,
        "disappear" => SpaceConfig::TreeRadial { degree: 3, down: None },
        _ => t3,
    };
    RunConfig {
        state_space,
        branching: BranchingConfig {
            mode: ModeConfig::Independent,
            lambda: None,
            offspring: OffspringConfig::Geometric { q: 0.5 },
            overrides: Vec::new(),
            rho: None,
        },
        experiment: ExperimentConfig::default(),
        seed: 1,
        threads: None,
        output: OutputConfig::default(),
    }
}

fn field(name: &str) -> String {
    format!("experiment.{name}")
}

impl RunConfig {
    /// Fill every experiment default for `study`.
    pub fn resolve(&self, study: &str) -> Result<RunConfig> {
        if !STUDIES.contains(&study) {
            return Err(BmcError::config("experiment.study", format!("unknown study `{study}`")));
        }
        let space = build_space(&self.state_space)?;
        let mut c = self.clone();
        let e = &mut c.experiment;
        e.study = Some(study.to_string());
        let root = space.format_vertex(space.root());
        let simulated = !matches!(study, "green" | "check" | "boundary-table");
        if simulated {
            let (horizon, trajectories) = match study {
                "simulate" => (10, 100),
                "disappear" => (25, 10_000),
                "gw" => (20, 100_000),
                "inequalities" => (12, 10_000),
                _ => (15, 10_000),
            };
            e.horizon.get_or_insert(OneOrMany::One(horizon));
            e.trajectories.get_or_insert(OneOrMany::One(trajectories));
            let cap = if study == "disappear" { 1_000_000_000_000 } else { crate::simulator::DEFAULT_CAP };
            e.cap.get_or_insert(cap);
            e.watched.get_or_insert_with(|| if study == "disappear" { vec![root.clone()] } else { Vec::new() });
            e.z.get_or_insert(crate::lab::DEFAULT_Z);
            e.max_truncated.get_or_insert(crate::lab::DEFAULT_MAX_TRUNCATED);
        }
        if simulated || study == "boundary-table" {
            e.initial.get_or_insert_with(|| vec![(root.clone(), 1)]);
        }
        if study == "simulate" {
            e.snapshot_steps.get_or_insert_with(Vec::new);
        }
        match study {
            "martingale" => {
                let d = MartingaleParams::default();
                e.eps.get_or_insert(d.eps);
                e.early.get_or_insert(d.early);
            }
            "positivity" => {
                let d = PositivityParams::default();
                e.eps.get_or_insert(d.eps);
                e.multiples.get_or_insert(d.multiples);
            }
            "boundary" | "simulate" | "boundary-table" => {
                if study == "boundary" || e.test_function.is_some() {
                    if let Some(t) = space.as_cayley() {
                        let a = t.alphabet();
                        let anchor = crate::boundary::anchors_at(a, 2)[0];
                        e.test_function
                            .get_or_insert_with(|| TestFunctionConfig { cylinders: vec![(a.format(anchor), 1.0)], constant: 0.0 });
                    }
                }
                if study == "boundary" {
                    let d = BoundaryParams::new(TestFunction::constant(0.0));
                    e.window.get_or_insert(d.window);
                    e.bc_tol.get_or_insert(d.bc_tol);
                    e.bc_fraction.get_or_insert(d.bc_fraction);
                }
                if study == "boundary-table" {
                    e.depth.get_or_insert(4);
                }
            }
            "disappear" => {
                e.rel_tol.get_or_insert(0.05);
                e.green_radius.get_or_insert(crate::boundary::green::DEFAULT_GREEN_RADIUS);
            }
            "green" => {
                let first = space.neighbors(space.root())?.first().map(|n| n.0).unwrap_or(space.root());
                e.pairs.get_or_insert_with(|| {
                    vec![(root.clone(), root.clone()), (root.clone(), space.format_vertex(first))]
                });
                e.green_radius.get_or_insert(crate::boundary::green::DEFAULT_GREEN_RADIUS);
                e.n_max.get_or_insert(2000);
                e.spectral_tolerance.get_or_insert(0.01);
            }
            "gw" => {
                let d = GwParams::default();
                e.w_range.get_or_insert(d.w_range);
                e.bins.get_or_insert(d.bins);
            }
            "inequalities" => {
                e.s_grid.get_or_insert(InequalityParams::default().s_grid);
                e.populations.get_or_insert_with(Vec::new);
            }
            _ => {}
        }
        Ok(c)
    }

    /// One resolved config per sweep point. A single point keeps the
    /// master seed; sweep point `i` uses `derive_seed(seed, i)`.
    pub fn expand(&self) -> Vec<RunConfig> {
        let hs: Vec<Option<usize>> = match &self.experiment.horizon {
            Some(h) => h.values().into_iter().map(Some).collect(),
            None => vec![None],
        };
        let ts: Vec<Option<usize>> = match &self.experiment.trajectories {
            Some(t) => t.values().into_iter().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for &h in &hs {
            for &t in &ts {
                let mut c = self.clone();
                c.experiment.horizon = h.map(OneOrMany::One);
                c.experiment.trajectories = t.map(OneOrMany::One);
                out.push(c);
            }
        }
        if out.len() > 1 {
            for (i, c) in out.iter_mut().enumerate() {
                c.seed = derive_seed(self.seed, i as u64);
            }
        }
        out
    }

    /// The config as echoed into reports. Worker count and output
    /// directory do not affect results, so they are left out.
    pub fn echo(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.threads = None;
        c.output.dir = None;
        serde_json::to_value(&c).expect("config serialises")
    }

    fn scalar<T: Copy>(v: &Option<OneOrMany<T>>, name: &str) -> Result<T> {
        match v {
            Some(OneOrMany::One(x)) => Ok(*x),
            _ => Err(BmcError::config(field(name), "expected a single value here")),
        }
    }

    pub fn horizon(&self) -> Result<usize> {
        Self::scalar(&self.experiment.horizon, "horizon")
    }

    pub fn trajectories(&self) -> Result<usize> {
        Self::scalar(&self.experiment.trajectories, "trajectories")
    }
}

pub fn build_space(c: &SpaceConfig) -> Result<StateSpace> {
    let law = |s: &StepLawConfig| match s {
        StepLawConfig::Simple(_) => StepLaw::Simple,
        StepLawConfig::Weights(w) => StepLaw::Weights(w.clone()),
        StepLawConfig::TowardRoot { toward_root } => StepLaw::TowardRoot(*toward_root),
    };
    let wrap = |e: BmcError, f: &str| match e {
        BmcError::Config { .. } => e,
        other => BmcError::config(f, other.to_string()),
    };
    match c {
        SpaceConfig::Tree { degree, step_law } => {
            StateSpace::tree(*degree, law(step_law)).map_err(|e| wrap(e, "state_space"))
        }
        SpaceConfig::FreeGroup { rank, step_law } => {
            StateSpace::free_group(*rank, law(step_law)).map_err(|e| wrap(e, "state_space"))
        }
        SpaceConfig::Explicit { states, matrix } => {
            StateSpace::explicit(states.clone(), matrix.clone()).map_err(|e| wrap(e, "state_space.matrix"))
        }
        SpaceConfig::TreeRadial { degree, down } => {
            let base = StateSpace::radial(*degree).map_err(|e| wrap(e, "state_space.degree"))?;
            match down {
                None => Ok(base),
                Some(q) if *q > 0.0 && *q < 1.0 => Ok(StateSpace::Radial { degree: *degree, down: *q }),
                Some(q) => Err(BmcError::config("state_space.down", format!("must lie in (0,1), got {q}"))),
            }
        }
        SpaceConfig::Singleton => Ok(StateSpace::Singleton),
    }
}

pub fn build_offspring(c: &OffspringConfig, name: &str) -> Result<OffspringPmf> {
    let pmf = match c {
        OffspringConfig::Delta { k } => OffspringPmf::delta(*k),
        OffspringConfig::Geometric { q } => OffspringPmf::geometric(*q),
        OffspringConfig::Explicit { support, probs } => OffspringPmf::explicit(support.clone(), probs.clone()),
        OffspringConfig::HeavyTail { mean, k0, k_max } => OffspringPmf::heavy_tail(*mean, *k0, *k_max),
    };
    pmf.map_err(|e| BmcError::config(name, e.to_string()))
}

pub fn build_law(c: &RunConfig, space: Arc<StateSpace>) -> Result<BranchingLaw> {
    let b = &c.branching;
    let mode = match b.mode {
        ModeConfig::Independent => Mode::Independent,
        ModeConfig::VertexCoupled => Mode::VertexCoupled,
        ModeConfig::Mixture => Mode::Mixture {
            lambda: b.lambda.ok_or_else(|| BmcError::config("branching.lambda", "required for mode `mixture`"))?,
        },
    };
    let base = build_offspring(&b.offspring, "branching.offspring")?;
    let overrides = if b.overrides.is_empty() {
        Overrides::None
    } else if b.overrides.iter().all(|o| o.state.is_some()) {
        let mut map = BTreeMap::new();
        for (i, o) in b.overrides.iter().enumerate() {
            let f = format!("branching.overrides[{i}]");
            let x = space
                .parse_vertex(o.state.as_deref().unwrap_or_default())
                .map_err(|e| BmcError::config(format!("{f}.state"), e.to_string()))?;
            map.insert(x, build_offspring(&o.offspring, &format!("{f}.offspring"))?);
        }
        Overrides::States(map)
    } else if b.overrides.iter().all(|o| o.state.is_none()) {
        let mut bands = Vec::new();
        for (i, o) in b.overrides.iter().enumerate() {
            let f = format!("branching.overrides[{i}]");
            bands.push((o.from.unwrap_or(0), o.to, build_offspring(&o.offspring, &format!("{f}.offspring"))?));
        }
        Overrides::Bands(bands)
    } else {
        return Err(BmcError::config("branching.overrides", "use either `state` entries or distance bands, not both"));
    };
    BranchingLaw::new(space, mode, base, overrides, b.rho).map_err(|e| match e {
        BmcError::Config { .. } => e,
        other => BmcError::config("branching", other.to_string()),
    })
}

pub fn parse_vertex(space: &StateSpace, s: &str, name: &str) -> Result<Vertex> {
    space.parse_vertex(s).map_err(|e| BmcError::config(name, e.to_string()))
}

pub fn build_population(space: &StateSpace, entries: &[(String, u64)], name: &str) -> Result<Population> {
    let mut pairs = Vec::new();
    for (i, (v, k)) in entries.iter().enumerate() {
        if *k == 0 {
            return Err(BmcError::config(format!("{name}[{i}]"), "counts must be positive"));
        }
        pairs.push((parse_vertex(space, v, &format!("{name}[{i}]"))?, *k));
    }
    let mut raw = pairs;
    let m = Population::from_unsorted(&mut raw)?;
    if m.is_empty() {
        return Err(BmcError::config(name, "population is empty"));
    }
    Ok(m)
}

pub fn build_test_function(space: &StateSpace, c: &TestFunctionConfig) -> Result<TestFunction> {
    let t = space
        .as_cayley()
        .ok_or_else(|| BmcError::config("experiment.test_function", "cylinder test functions need a tree or free-group space"))?;
    let a = t.alphabet();
    let mut terms = Vec::new();
    for (i, (w, coeff)) in c.cylinders.iter().enumerate() {
        let name = format!("experiment.test_function.cylinders[{i}]");
        let v = parse_vertex(space, w, &name)?;
        terms.push((Cylinder::new(a, v).map_err(|e| BmcError::config(name, e.to_string()))?, *coeff));
    }
    Ok(TestFunction { terms, constant: c.constant })
}

/// Built objects for one resolved config.
pub struct Built {
    pub config: RunConfig,
    pub space: Arc<StateSpace>,
    pub law: BranchingLaw,
}

impl Built {
    pub fn new(resolved: &RunConfig) -> Result<Self> {
        let space = Arc::new(build_space(&resolved.state_space)?);
        let law = build_law(resolved, space.clone())?;
        Ok(Built { config: resolved.clone(), space, law })
    }

    fn exp(&self) -> &ExperimentConfig {
        &self.config.experiment
    }

    pub fn initial(&self) -> Result<Population> {
        build_population(&self.space, self.exp().initial.as_deref().unwrap_or_default(), "experiment.initial")
    }

    pub fn watched(&self) -> Result<Vec<Vertex>> {
        let w = self.exp().watched.as_deref().unwrap_or_default();
        w.iter().enumerate().map(|(i, s)| parse_vertex(&self.space, s, &format!("experiment.watched[{i}]"))).collect()
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let e = self.exp();
        let mut x = Experiment::new(
            self.law.clone(),
            self.initial()?,
            self.config.horizon()?,
            self.config.trajectories()?,
            self.config.seed,
        );
        x.cap = e.cap.unwrap_or(crate::simulator::DEFAULT_CAP);
        x.threads = self.config.threads;
        x.z = e.z.unwrap_or(crate::lab::DEFAULT_Z);
        x.max_truncated = e.max_truncated.unwrap_or(crate::lab::DEFAULT_MAX_TRUNCATED);
        if !(x.z > 0.0) {
            return Err(BmcError::config(field("z"), "must be positive"));
        }
        Ok(x)
    }

    pub fn test_function(&self) -> Result<Option<TestFunction>> {
        self.exp().test_function.as_ref().map(|t| build_test_function(&self.space, t)).transpose()
    }

    pub fn martingale_params(&self) -> MartingaleParams {
        let d = MartingaleParams::default();
        MartingaleParams { eps: self.exp().eps.unwrap_or(d.eps), early: self.exp().early.unwrap_or(d.early) }
    }

    pub fn positivity_params(&self) -> PositivityParams {
        let d = PositivityParams::default();
        PositivityParams {
            eps: self.exp().eps.unwrap_or(d.eps),
            multiples: self.exp().multiples.clone().unwrap_or(d.multiples),
            pilot_band: self.exp().omega_band,
        }
    }

    pub fn boundary_params(&self) -> Result<BoundaryParams> {
        let phi = self
            .test_function()?
            .ok_or_else(|| BmcError::config("experiment.test_function", "required for the boundary study"))?;
        let mut p = BoundaryParams::new(phi);
        let e = self.exp();
        p.window = e.window.unwrap_or(p.window);
        p.bc_tol = e.bc_tol.unwrap_or(p.bc_tol);
        p.bc_fraction = e.bc_fraction.unwrap_or(p.bc_fraction);
        p.cauchy_band = e.cauchy_band;
        Ok(p)
    }

    pub fn disappear_params(&self) -> Result<DisappearParams> {
        let mut p = DisappearParams::new(self.watched()?);
        if p.watched.is_empty() {
            return Err(BmcError::config(field("watched"), "name at least one state"));
        }
        p.rel_tol = self.exp().rel_tol.unwrap_or(p.rel_tol);
        p.green_radius = self.exp().green_radius.unwrap_or(p.green_radius);
        Ok(p)
    }

    pub fn gw_params(&self) -> GwParams {
        let d = GwParams::default();
        GwParams { w_range: self.exp().w_range.unwrap_or(d.w_range), bins: self.exp().bins.unwrap_or(d.bins) }
    }

    pub fn inequality_params(&self) -> Result<InequalityParams> {
        let d = InequalityParams::default();
        let populations = self
            .exp()
            .populations
            .as_deref()
            .unwrap_or_default()
            .iter()
            .enumerate()
            .map(|(i, p)| build_population(&self.space, p, &format!("experiment.populations[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        Ok(InequalityParams { s_grid: self.exp().s_grid.clone().unwrap_or(d.s_grid), populations })
    }

    pub fn green_params(&self) -> Result<GreenParams> {
        let mut p = GreenParams::new(self.pairs()?);
        let e = self.exp();
        p.radius = e.green_radius.unwrap_or(p.radius);
        p.n_max = e.n_max.unwrap_or(p.n_max);
        p.spectral_tolerance = e.spectral_tolerance.unwrap_or(p.spectral_tolerance);
        if !(p.spectral_tolerance > 0.0) {
            return Err(BmcError::config(field("spectral_tolerance"), "must be positive"));
        }
        Ok(p)
    }

    pub fn pairs(&self) -> Result<Vec<(Vertex, Vertex)>> {
        let pairs = self.exp().pairs.as_deref().unwrap_or_default();
        pairs
            .iter()
            .enumerate()
            .map(|(i, (x, y))| {
                let f = format!("experiment.pairs[{i}]");
                Ok((parse_vertex(&self.space, x, &f)?, parse_vertex(&self.space, y, &f)?))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "state_space": {"type": "tree", "degree": 3, "step_law": "simple"},
        "branching": {"mode": "independent", "offspring": {"kind": "geometric", "q": 0.5}},
        "experiment": {"horizon": 4, "trajectories": 10, "watched": ["o", "a"]},
        "seed": 9
    }"#;

    #[test]
    fn parses_and_builds() {
        let c = parse(EXAMPLE).unwrap().resolve("simulate").unwrap();
        let b = Built::new(&c).unwrap();
        assert_eq!(b.law.rho(), 2.0);
        assert_eq!(b.watched().unwrap().len(), 2);
        assert_eq!(b.experiment().unwrap().horizon, 4);
    }

    #[test]
    fn echo_round_trips() {
        for study in ["martingale", "boundary", "green", "inequalities", "disappear"] {
            let c = parse(EXAMPLE).unwrap().resolve(study).unwrap();
            let echoed = serde_json::to_string(&c).unwrap();
            assert_eq!(parse(&echoed).unwrap(), c, "{study}");
            assert_eq!(parse(&echoed).unwrap().resolve(study).unwrap(), c, "{study}");
        }
    }

    #[test]
    fn errors_name_the_field() {
        let missing = r#"{"state_space": {"type": "tree", "degree": 3}, "branching": {"mode": "independent"}}"#;
        match parse(missing) {
            Err(BmcError::Config { field, message }) => {
                assert_eq!(field, "branching.offspring");
                assert!(message.contains("offspring"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"state_space": {"type": "tree", "degree": 3, "colour": 1}, "branching": {"offspring": {"kind": "delta", "k": 2}}}"#;
        assert!(matches!(parse(unknown), Err(BmcError::Config { .. })));
        let bad_q = r#"{"state_space": {"type": "singleton"}, "branching": {"offspring": {"kind": "geometric", "q": 2.0}}}"#;
        let c = parse(bad_q).unwrap().resolve("gw").unwrap();
        match Built::new(&c) {
            Err(BmcError::Config { field, .. }) => assert_eq!(field, "branching.offspring"),
            Err(e) => panic!("{e}"),
            Ok(_) => panic!("accepted q = 2"),
        }
        let mix = r#"{"state_space": {"type": "singleton"}, "branching": {"mode": "mixture", "offspring": {"kind": "delta", "k": 2}}}"#;
        let c = parse(mix).unwrap().resolve("gw").unwrap();
        assert!(matches!(Built::new(&c), Err(BmcError::Config { field, .. }) if field == "branching.lambda"));
    }

    #[test]
    fn sweeps_expand_with_derived_seeds() {
        let text = EXAMPLE.replace("\"horizon\": 4", "\"horizon\": [3, 4, 5]");
        let c = parse(&text).unwrap().resolve("simulate").unwrap();
        let runs = c.expand();
        assert_eq!(runs.len(), 3);
        assert_eq!(runs[1].horizon().unwrap(), 4);
        assert_eq!(runs[1].seed, derive_seed(9, 1));
        assert_eq!(parse(EXAMPLE).unwrap().resolve("simulate").unwrap().expand()[0].seed, 9);
    }

    #[test]
    fn explicit_and_overrides() {
        let text = r#"{
            "state_space": {"type": "explicit", "states": ["u", "v", "w"],
                            "matrix": [[0, 0.5, 0.5], [1, 0, 0], [0.25, 0.25, 0.5]]},
            "branching": {"offspring": {"kind": "delta", "k": 2},
                          "overrides": [{"state": "v", "offspring": {"kind": "explicit", "support": [1, 3], "probs": [0.5, 0.5]}}],
                          "rho": 2.0}
        }"#;
        let c = parse(text).unwrap().resolve("simulate").unwrap();
        let b = Built::new(&c).unwrap();
        assert_eq!(b.space.neighbors(2).unwrap(), vec![(0, 0.25), (1, 0.25), (2, 0.5)]);
        assert_eq!(b.law.offspring_at(1).mean(), 2.0);
    }
}
