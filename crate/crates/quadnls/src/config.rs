//! Experiment configuration: flat 'section.key = value' text, strict in
//! both directions. Parsing rejects unknown and duplicate keys; emission
//! writes every resolved key in a fixed order, so an artifact's embedded
//! config reproduces the run that made it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dynamics::{
    FieldSlot, GaussianPulse, InitialData, SimulationConfig, SystemForm,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ground_state::GroundStateMethod;
use crate::io;
use crate::noise::{BumpSpec, NoiseModel, FLATNESS_ORDER, FLATNESS_THRESHOLD};

/// Initial data as configured; file references stay unresolved until a
/// simulation is built so parsing never touches the filesystem.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    Zero,
    GroundStateFraction { mass_fraction: f64 },
    Pulses {
        pulses: Vec<GaussianPulse>,
        target_mass: Option<f64>,
    },
    File { path: PathBuf },
}

/// Fully resolved experiment description; one of these drives every
/// subcommand.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub system: SystemForm,
    pub nonlinearity_on: bool,
    pub grid: Grid,
    pub bumps: Vec<BumpSpec>,
    pub flatness_order: usize,
    pub flatness_threshold: f64,
    /// Brownian lattice spacing; None means the run's dt
    pub path_dt: Option<f64>,
    pub initial: InitialSpec,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub cadence: usize,
    /// None selects the automatic multiple of the initial H1 sum
    pub blowup_threshold: Option<f64>,
    pub trajectories: usize,
    /// worker threads for ensembles; 0 means all available cores
    pub jobs: usize,
    pub dump_paths: bool,
    /// ground-state metadata sidecar consulted for bound diagnostics
    pub gs_artifact: Option<PathBuf>,
    pub ground_state_method: GroundStateMethod,
    /// None selects the method's own default tolerance
    pub ground_state_tol: Option<f64>,
}

impl Default for ExperimentConfig {
    /// The stock experiment: the critical dimension on a coarse box with
    /// two wide bumps and ground-state initial data below the threshold
    /// mass. The wide bumps need the loosened flatness gate: on a compact
    /// box no width is both flat at the boundary and resolved at n = 16.
    fn default() -> Self {
        let grid = Grid::new(4, 16, 10.5).expect("stock grid is valid");
        let bump = |x0: f64| BumpSpec {
            amplitude: 0.25,
            center: vec![x0, 0.0, 0.0, 0.0],
            sigma: 2.5,
        };
        ExperimentConfig {
            system: SystemForm::Rescaled,
            nonlinearity_on: true,
            grid,
            bumps: vec![bump(1.0), bump(-1.0)],
            flatness_order: FLATNESS_ORDER,
            flatness_threshold: 10.0,
            path_dt: None,
            initial: InitialSpec::GroundStateFraction { mass_fraction: 0.81 },
            horizon: 1.0,
            dt: 1e-2,
            seed: 1,
            cadence: 10,
            blowup_threshold: None,
            trajectories: 20,
            jobs: 0,
            dump_paths: false,
            gs_artifact: None,
            ground_state_method: GroundStateMethod::Shooting,
            ground_state_tol: None,
        }
    }
}

fn bool_word(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn join_vec(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn slot_word(slot: FieldSlot) -> &'static str {
    match slot {
        FieldSlot::U => "u",
        FieldSlot::V => "v",
    }
}

impl ExperimentConfig {
    /// Canonical emission: fixed section and key order, every resolved key
    /// present, optional keys only when set. Re-parsing the emission gives
    /// back an equal config.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: &str| {
            writeln!(s, "{k} = {v}").expect("string write");
        };
        kv(&mut s, "system.form", &self.system.to_string());
        kv(&mut s, "system.nonlinearity", bool_word(self.nonlinearity_on));
        kv(&mut s, "grid.d", &self.grid.d().to_string());
        kv(&mut s, "grid.n", &self.grid.n().to_string());
        kv(&mut s, "grid.length", &format!("{}", self.grid.length()));
        kv(&mut s, "noise.bumps", &self.bumps.len().to_string());
        for (i, b) in self.bumps.iter().enumerate() {
            let p = format!("noise.bump_{}", i + 1);
            kv(&mut s, &format!("{p}.amplitude"), &format!("{}", b.amplitude));
            kv(&mut s, &format!("{p}.center"), &join_vec(&b.center));
            kv(&mut s, &format!("{p}.sigma"), &format!("{}", b.sigma));
        }
        kv(
            &mut s,
            "noise.flatness_order",
            &self.flatness_order.to_string(),
        );
        kv(
            &mut s,
            "noise.flatness_threshold",
            &format!("{}", self.flatness_threshold),
        );
        if let Some(pdt) = self.path_dt {
            kv(&mut s, "noise.path_dt", &format!("{pdt}"));
        }
        match &self.initial {
            InitialSpec::Zero => kv(&mut s, "initial.kind", "zero"),
            InitialSpec::GroundStateFraction { mass_fraction } => {
                kv(&mut s, "initial.kind", "ground-state");
                kv(&mut s, "initial.mass_fraction", &format!("{mass_fraction}"));
            }
            InitialSpec::Pulses { pulses, target_mass } => {
                kv(&mut s, "initial.kind", "pulses");
                kv(&mut s, "initial.pulses", &pulses.len().to_string());
                for (i, p) in pulses.iter().enumerate() {
                    let pre = format!("initial.pulse_{}", i + 1);
                    kv(&mut s, &format!("{pre}.component"), slot_word(p.slot));
                    kv(&mut s, &format!("{pre}.amplitude"), &format!("{}", p.amplitude));
                    kv(&mut s, &format!("{pre}.center"), &join_vec(&p.center));
                    kv(&mut s, &format!("{pre}.width"), &format!("{}", p.width));
                    kv(&mut s, &format!("{pre}.wave"), &join_vec(&p.wave));
                }
                if let Some(m) = target_mass {
                    kv(&mut s, "initial.target_mass", &format!("{m}"));
                }
            }
            InitialSpec::File { path } => {
                kv(&mut s, "initial.kind", "file");
                kv(&mut s, "initial.file", &path.display().to_string());
            }
        }
        kv(&mut s, "run.horizon", &format!("{}", self.horizon));
        kv(&mut s, "run.dt", &format!("{}", self.dt));
        kv(&mut s, "run.seed", &self.seed.to_string());
        kv(&mut s, "run.cadence", &self.cadence.to_string());
        if let Some(th) = self.blowup_threshold {
            kv(&mut s, "run.blowup_threshold", &format!("{th}"));
        }
        kv(&mut s, "run.trajectories", &self.trajectories.to_string());
        kv(&mut s, "run.jobs", &self.jobs.to_string());
        kv(&mut s, "run.dump_paths", bool_word(self.dump_paths));
        if let Some(p) = &self.gs_artifact {
            kv(&mut s, "run.gs_artifact", &p.display().to_string());
        }
        kv(
            &mut s,
            "ground_state.method",
            &self.ground_state_method.to_string(),
        );
        if let Some(tol) = self.ground_state_tol {
            kv(&mut s, "ground_state.tol", &format!("{tol}"));
        }
        s
    }

    /// Emission split into pairs, for embedding in artifact preambles.
    pub fn emit_pairs(&self) -> Vec<(String, String)> {
        self.emit()
            .lines()
            .map(|line| {
                let (k, v) = line.split_once('=').expect("emission is key = value");
                (k.trim().to_string(), v.trim().to_string())
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        Parser::new(text)?.finish()
    }

    /// Build the noise model this config describes.
    pub fn noise_model(&self) -> Result<NoiseModel> {
        if self.bumps.is_empty() {
            return Ok(NoiseModel::empty(self.grid));
        }
        NoiseModel::gaussian_with_gate(
            self.grid,
            &self.bumps,
            self.flatness_order,
            self.flatness_threshold,
        )
    }

    /// Resolve into the integrator's configuration; file initial data is
    /// loaded here and must match the configured grid.
    pub fn to_simulation(&self) -> Result<SimulationConfig> {
        let initial = match &self.initial {
            InitialSpec::Zero => InitialData::Zero,
            InitialSpec::GroundStateFraction { mass_fraction } => {
                InitialData::GroundStateFraction {
                    fraction: *mass_fraction,
                }
            }
            InitialSpec::Pulses { pulses, target_mass } => InitialData::Pulses {
                pulses: pulses.clone(),
                target_mass: *target_mass,
            },
            InitialSpec::File { path } => {
                let (u, v, _t) = io::read_checkpoint(path)?;
                self.grid.assert_same(u.grid(), "initial checkpoint")?;
                InitialData::Fields { u, v }
            }
        };
        Ok(SimulationConfig {
            system: self.system,
            grid: self.grid,
            noise: self.noise_model()?,
            horizon: self.horizon,
            dt: self.dt,
            initial,
            seed: self.seed,
            blowup_threshold: self.blowup_threshold,
            cadence: self.cadence,
            nonlinearity_on: self.nonlinearity_on,
            path_dt: self.path_dt,
        })
    }
}

const CONTEXT: &str = "experiment config";

/// One-shot key store: every key is read at most once, and anything left
/// unread at the end is an unknown key.
struct Parser {
    pairs: BTreeMap<String, String>,
}

impl Parser {
    fn new(text: &str) -> Result<Parser> {
        let mut pairs = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = match line.split_once('=') {
                Some((k, v)) => (k.trim().to_string(), v.trim().to_string()),
                None => {
                    return Err(Error::parse(
                        CONTEXT,
                        format!("line {}: expected 'key = value', got '{line}'", ln + 1),
                    ));
                }
            };
            if pairs.insert(k.clone(), v).is_some() {
                return Err(Error::parse(CONTEXT, format!("duplicate key '{k}'")));
            }
        }
        Ok(Parser { pairs })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.pairs.remove(key)
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| Error::parse(CONTEXT, format!("missing required key '{key}'")))
    }

    fn parse_with<T>(
        key: &str,
        raw: &str,
        parse: impl Fn(&str) -> Option<T>,
        expected: &str,
    ) -> Result<T> {
        parse(raw).ok_or_else(|| {
            Error::parse(CONTEXT, format!("key '{key}': expected {expected}, got '{raw}'"))
        })
    }

    fn f64_of(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => Self::parse_with(key, &raw, |s| s.parse().ok(), "a number"),
        }
    }

    fn f64_required(&mut self, key: &str) -> Result<f64> {
        let raw = self.required(key)?;
        Self::parse_with(key, &raw, |s| s.parse().ok(), "a number")
    }

    fn f64_optional(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => Ok(Some(Self::parse_with(
                key,
                &raw,
                |s| s.parse().ok(),
                "a number",
            )?)),
        }
    }

    fn usize_of(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => Self::parse_with(key, &raw, |s| s.parse().ok(), "a nonnegative integer"),
        }
    }

    fn usize_required(&mut self, key: &str) -> Result<usize> {
        let raw = self.required(key)?;
        Self::parse_with(key, &raw, |s| s.parse().ok(), "a nonnegative integer")
    }

    fn u64_of(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => Self::parse_with(key, &raw, |s| s.parse().ok(), "an unsigned integer"),
        }
    }

    fn bool_of(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => Self::parse_with(
                key,
                &raw,
                |s| match s {
                    "on" => Some(true),
                    "off" => Some(false),
                    _ => None,
                },
                "'on' or 'off'",
            ),
        }
    }

    fn vector_required(&mut self, key: &str, d: usize) -> Result<Vec<f64>> {
        let raw = self.required(key)?;
        Self::vector_from(key, &raw, d)
    }

    fn vector_from(key: &str, raw: &str, d: usize) -> Result<Vec<f64>> {
        let parts: Vec<&str> = raw.split_whitespace().collect();
        if parts.len() != d {
            return Err(Error::parse(
                CONTEXT,
                format!("key '{key}': expected {d} components, got {}", parts.len()),
            ));
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<f64>().map_err(|_| {
                    Error::parse(CONTEXT, format!("key '{key}': bad component '{p}'"))
                })
            })
            .collect()
    }

    fn finish(mut self) -> Result<ExperimentConfig> {
        let system = match self.take("system.form") {
            None => SystemForm::Deterministic,
            Some(raw) => raw.parse()?,
        };
        let nonlinearity_on = self.bool_of("system.nonlinearity", true)?;

        let d = self.usize_required("grid.d")?;
        let n = self.usize_required("grid.n")?;
        let length = self.f64_required("grid.length")?;
        let grid = Grid::new(d, n, length)?;

        let n_bumps = self.usize_of("noise.bumps", 0)?;
        if n_bumps > 16 {
            return Err(Error::parse(
                CONTEXT,
                format!("noise.bumps: at most 16 supported, got {n_bumps}"),
            ));
        }
        let mut bumps = Vec::with_capacity(n_bumps);
        for i in 1..=n_bumps {
            let p = format!("noise.bump_{i}");
            bumps.push(BumpSpec {
                amplitude: self.f64_required(&format!("{p}.amplitude"))?,
                center: self.vector_required(&format!("{p}.center"), d)?,
                sigma: self.f64_required(&format!("{p}.sigma"))?,
            });
        }
        let flatness_order = self.usize_of("noise.flatness_order", FLATNESS_ORDER)?;
        let flatness_threshold =
            self.f64_of("noise.flatness_threshold", FLATNESS_THRESHOLD)?;
        let path_dt = self.f64_optional("noise.path_dt")?;

        let initial = match self.take("initial.kind").as_deref() {
            None | Some("zero") => InitialSpec::Zero,
            Some("ground-state") => InitialSpec::GroundStateFraction {
                mass_fraction: self.f64_required("initial.mass_fraction")?,
            },
            Some("file") => InitialSpec::File {
                path: PathBuf::from(self.required("initial.file")?),
            },
            Some("pulses") => {
                let count = self.usize_required("initial.pulses")?;
                if count == 0 {
                    return Err(Error::parse(CONTEXT, "initial.pulses must be at least 1"));
                }
                let mut pulses = Vec::with_capacity(count);
                for i in 1..=count {
                    let pre = format!("initial.pulse_{i}");
                    let slot = {
                        let raw = self.required(&format!("{pre}.component"))?;
                        Self::parse_with(
                            &format!("{pre}.component"),
                            &raw,
                            |s| match s {
                                "u" => Some(FieldSlot::U),
                                "v" => Some(FieldSlot::V),
                                _ => None,
                            },
                            "'u' or 'v'",
                        )?
                    };
                    let wave = match self.take(&format!("{pre}.wave")) {
                        None => vec![0.0; d],
                        Some(raw) => Self::vector_from(&format!("{pre}.wave"), &raw, d)?,
                    };
                    pulses.push(GaussianPulse {
                        slot,
                        amplitude: self.f64_required(&format!("{pre}.amplitude"))?,
                        center: self.vector_required(&format!("{pre}.center"), d)?,
                        width: self.f64_required(&format!("{pre}.width"))?,
                        wave,
                    });
                }
                InitialSpec::Pulses {
                    pulses,
                    target_mass: self.f64_optional("initial.target_mass")?,
                }
            }
            Some(other) => {
                return Err(Error::parse(
                    CONTEXT,
                    format!(
                        "initial.kind: expected zero, ground-state, pulses, or file, got '{other}'"
                    ),
                ));
            }
        };

        let horizon = self.f64_of("run.horizon", 1.0)?;
        let dt = self.f64_of("run.dt", 1e-3)?;
        let seed = self.u64_of("run.seed", 0)?;
        let cadence = self.usize_of("run.cadence", 1)?;
        let blowup_threshold = self.f64_optional("run.blowup_threshold")?;
        let trajectories = self.usize_of("run.trajectories", 1)?;
        let jobs = self.usize_of("run.jobs", 0)?;
        let dump_paths = self.bool_of("run.dump_paths", false)?;
        let gs_artifact = self.take("run.gs_artifact").map(PathBuf::from);

        let ground_state_method = match self.take("ground_state.method") {
            None => {
                if grid.d() == 4 {
                    GroundStateMethod::Shooting
                } else {
                    GroundStateMethod::Flow
                }
            }
            Some(raw) => raw.parse()?,
        };
        let ground_state_tol = self.f64_optional("ground_state.tol")?;

        if let Some(unknown) = self.pairs.keys().next() {
            return Err(Error::parse(CONTEXT, format!("unknown key '{unknown}'")));
        }

        Ok(ExperimentConfig {
            system,
            nonlinearity_on,
            grid,
            bumps,
            flatness_order,
            flatness_threshold,
            path_dt,
            initial,
            horizon,
            dt,
            seed,
            cadence,
            blowup_threshold,
            trajectories,
            jobs,
            dump_paths,
            gs_artifact,
            ground_state_method,
            ground_state_tol,
        })
    }
}
