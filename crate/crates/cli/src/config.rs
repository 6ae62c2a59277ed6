//! Experiment configuration: per-experiment defaults, JSON overrides and
//! validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use trimode::classical::Matching;
use trimode::fock::{ModeTriple, ThermalInit};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Evolve,
    PhaseDiagram,
    FanoMap,
    PanelSweep,
    IncoherentCompare,
    EquilibrationTex,
    PurityDecay,
    GapSpectrum,
    ClassicalCompare,
    OpenSystemSweep,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::Evolve => "evolve",
            Experiment::PhaseDiagram => "phase-diagram",
            Experiment::FanoMap => "fano-map",
            Experiment::PanelSweep => "panel-sweep",
            Experiment::IncoherentCompare => "incoherent-compare",
            Experiment::EquilibrationTex => "equilibration-tex",
            Experiment::PurityDecay => "purity-decay",
            Experiment::GapSpectrum => "gap-spectrum",
            Experiment::ClassicalCompare => "classical-compare",
            Experiment::OpenSystemSweep => "open-system-sweep",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Initial thermal state, given by one of three equivalent descriptions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Mean occupations `(n̄_h, n̄_w, n̄_c)`.
    Nbar([f64; 3]),
    /// Energies in units of the mode quanta, `n̄ + 1/2`.
    EnergyQuanta([f64; 3]),
    Temperatures([f64; 3]),
}

impl InitSpec {
    pub fn resolve(&self, modes: &ModeTriple<f64>) -> trimode::Result<ThermalInit<f64>> {
        match *self {
            InitSpec::Nbar([h, w, c]) => ThermalInit::from_occupations(h, w, c),
            InitSpec::EnergyQuanta([h, w, c]) => ThermalInit::from_energy_quanta(h, w, c),
            InitSpec::Temperatures(t) => ThermalInit::from_temperatures(t, modes),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub end: f64,
    pub step: f64,
}

impl TimeGrid {
    pub fn samples(&self) -> Vec<f64> {
        let n = (self.end / self.step).round() as usize;
        (0..=n).map(|i| (i as f64 * self.step).min(self.end)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let n = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.min + (self.max - self.min) * i as f64 / n)
            .collect()
    }
}

/// Plane of initial conditions in energy quanta, at fixed cold occupation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub eps_h: Axis,
    pub eps_w: Axis,
    pub nbar_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub eps_h: f64,
    pub eps_c: f64,
    pub eps_w: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PuritySpec {
    /// Block sizes `N = M`; the initial state is `|⌊N/3⌋, N−⌊N/3⌋, M−⌊N/3⌋⟩`.
    pub sizes: Vec<usize>,
    /// Log-spaced sample times in `[t_min, t_max]`, plus `t = 0`.
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    /// Late-time average taken over samples at `t ≥ average_from`.
    pub average_from: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSpec {
    pub n_sum: usize,
    pub m_values: Vec<usize>,
    pub bin_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSpec {
    pub n_traj: u64,
    pub matchings: Vec<MatchingName>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingName {
    Energies,
    Temperatures,
}

impl From<MatchingName> for Matching {
    fn from(m: MatchingName) -> Self {
        match m {
            MatchingName::Energies => Matching::MatchEnergies,
            MatchingName::Temperatures => Matching::MatchTemperatures,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSpec {
    pub kappas: Vec<f64>,
    /// `null` picks cutoffs from the thermal tails.
    pub cutoffs: Option<[usize; 3]>,
    pub auto_tail: f64,
    pub step: f64,
}

/// Fully resolved configuration. Sections not used by the experiment are
/// absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub output: String,
    pub seed: u64,
    /// `(ω_h, ω_w, ω_c)` in units of g.
    pub modes: [f64; 3],
    /// Fock-state probability below which states are dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity: Option<PuritySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<GapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<OpenSpec>,
}

const DEFAULT_SEED: u64 = 20_240_611;

fn default_grid() -> GridSpec {
    GridSpec {
        eps_h: Axis { min: 0.55, max: 4.5, points: 41 },
        eps_w: Axis { min: 0.55, max: 6.5, points: 41 },
        nbar_c: 2.0,
    }
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            output: format!("out/{experiment}"),
            seed: DEFAULT_SEED,
            modes: [2.0, 1.0, 1.0],
            threshold: None,
            init: None,
            time: None,
            grid: None,
            sweep: None,
            gamma: None,
            purity: None,
            gaps: None,
            classical: None,
            open: None,
        };
        let fig1 = InitSpec::Nbar([0.5, 2.5, 2.0]);
        let cooling = InitSpec::Nbar([1.0, 5.0, 2.0]);
        match experiment {
            Experiment::Evolve => {
                c.threshold = Some(1e-10);
                c.init = Some(fig1);
                c.time = Some(TimeGrid { end: 20.0, step: 0.01 });
            }
            Experiment::PhaseDiagram => {
                c.threshold = Some(1e-6);
                c.grid = Some(default_grid());
            }
            Experiment::FanoMap => {
                c.threshold = Some(1e-8);
                c.grid = Some(default_grid());
            }
            Experiment::PanelSweep => {
                c.threshold = Some(1e-8);
                c.time = Some(TimeGrid { end: 20.0, step: 0.01 });
                c.sweep = Some(SweepSpec {
                    eps_h: 1.5,
                    eps_c: 2.5,
                    eps_w: vec![1.5, 2.5, 3.5, 4.5, 5.5],
                });
            }
            Experiment::IncoherentCompare => {
                c.threshold = Some(1e-10);
                c.init = Some(cooling);
                c.time = Some(TimeGrid { end: 20.0, step: 0.01 });
                c.gamma = Some(1.0);
            }
            Experiment::EquilibrationTex => {
                c.threshold = Some(1e-6);
                c.grid = Some(default_grid());
                c.time = Some(TimeGrid { end: 10.0, step: 0.01 });
            }
            Experiment::PurityDecay => {
                c.purity = Some(PuritySpec {
                    sizes: vec![30, 100, 300],
                    t_min: 1e-3,
                    t_max: 1e3,
                    points: 601,
                    average_from: 100.0,
                });
            }
            Experiment::GapSpectrum => {
                c.gaps = Some(GapSpec {
                    n_sum: 1000,
                    m_values: vec![1000, 1500, 2000],
                    bin_width: 2.0,
                });
            }
            Experiment::ClassicalCompare => {
                c.threshold = Some(1e-10);
                c.init = Some(cooling);
                c.time = Some(TimeGrid { end: 5.0, step: 0.01 });
                c.classical = Some(ClassicalSpec {
                    n_traj: 1_000_000,
                    matchings: vec![MatchingName::Energies, MatchingName::Temperatures],
                });
            }
            Experiment::OpenSystemSweep => {
                c.threshold = Some(1e-10);
                c.init = Some(fig1);
                c.time = Some(TimeGrid { end: 10.0, step: 0.05 });
                c.open = Some(OpenSpec {
                    kappas: vec![0.0, 0.01, 0.1, 1.0, 10.0],
                    cutoffs: Some(trimode::open_system::DEFAULT_CUTOFFS),
                    auto_tail: 1e-4,
                    step: trimode::open_system::DEFAULT_STEP,
                });
            }
        }
        c
    }

    /// Defaults for `experiment` overridden by `overrides`, a JSON object.
    /// Nested objects merge key by key; `init` is replaced as a whole.
    pub fn from_overrides(experiment: Experiment, overrides: Value) -> Result<Self, CliError> {
        let Value::Object(map) = overrides else {
            return Err(CliError::config("$", "configuration must be a JSON object"));
        };
        if let Some(v) = map.get("experiment") {
            if v != &Value::String(experiment.id().into()) {
                return Err(CliError::config(
                    "experiment",
                    format!("file is for {v}, but the subcommand is {experiment}"),
                ));
            }
        }
        let mut merged = serde_json::to_value(Self::defaults(experiment)).expect("defaults serialize");
        let defaults = merged.as_object().expect("object").clone();
        for key in map.keys() {
            if !defaults.contains_key(key) && KNOWN_SECTIONS.contains(&key.as_str()) {
                return Err(CliError::config(key, format!("section is not used by {experiment}")));
            }
        }
        merge(&mut merged, Value::Object(map), true);
        let config: Self = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(&path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |path: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(path, format!("must be positive and finite, got {x}")))
            }
        };
        for (i, w) in self.modes.iter().enumerate() {
            positive(&format!("modes[{i}]"), *w)?;
        }
        let m = ModeTriple::new(self.modes[0], self.modes[1], self.modes[2])
            .map_err(|e| CliError::config("modes", e.to_string()))?;
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::config("threshold", "must lie in (0, 1)"));
            }
        }
        if let Some(init) = &self.init {
            init.resolve(&m).map_err(|e| CliError::config("init", e.to_string()))?;
        }
        if let Some(t) = &self.time {
            positive("time.end", t.end)?;
            positive("time.step", t.step)?;
            let extrema = matches!(
                self.experiment,
                Experiment::Evolve | Experiment::PanelSweep | Experiment::EquilibrationTex
            );
            if extrema && t.step > trimode::unitary::EXTREMUM_MAX_STEP * (1.0 + 1e-9) {
                return Err(CliError::config(
                    "time.step",
                    format!("extremum location needs a step of at most {}", trimode::unitary::EXTREMUM_MAX_STEP),
                ));
            }
        }
        if let Some(g) = &self.grid {
            for (name, a) in [("grid.eps_h", g.eps_h), ("grid.eps_w", g.eps_w)] {
                if a.points == 0 {
                    return Err(CliError::config(&format!("{name}.points"), "must be at least 1"));
                }
                if !(a.min >= 0.5 && a.max >= a.min && a.max.is_finite()) {
                    return Err(CliError::config(name, "need 0.5 ≤ min ≤ max"));
                }
            }
            if !(g.nbar_c >= 0.0 && g.nbar_c.is_finite()) {
                return Err(CliError::config("grid.nbar_c", "must be finite and non-negative"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.eps_w.is_empty() {
                return Err(CliError::config("sweep.eps_w", "must not be empty"));
            }
            for (path, x) in [("sweep.eps_h", s.eps_h), ("sweep.eps_c", s.eps_c)]
                .into_iter()
                .chain(s.eps_w.iter().map(|&x| ("sweep.eps_w", x)))
            {
                if !(x >= 0.5 && x.is_finite()) {
                    return Err(CliError::config(path, format!("energy quanta must be at least 0.5, got {x}")));
                }
            }
        }
        if let Some(g) = self.gamma {
            positive("gamma", g)?;
        }
        if let Some(p) = &self.purity {
            if p.sizes.is_empty() {
                return Err(CliError::config("purity.sizes", "must not be empty"));
            }
            positive("purity.t_min", p.t_min)?;
            if !(p.t_max > p.t_min) {
                return Err(CliError::config("purity.t_max", "must exceed t_min"));
            }
            if p.points < 2 {
                return Err(CliError::config("purity.points", "must be at least 2"));
            }
        }
        if let Some(g) = &self.gaps {
            positive("gaps.bin_width", g.bin_width)?;
            for (i, &m) in g.m_values.iter().enumerate() {
                if g.n_sum.min(m) < 1 {
                    return Err(CliError::config(&format!("gaps.m_values[{i}]"), "block needs dimension ≥ 2"));
                }
            }
        }
        if let Some(c) = &self.classical {
            if c.n_traj == 0 {
                return Err(CliError::config("classical.n_traj", "must be at least 1"));
            }
            if c.matchings.is_empty() {
                return Err(CliError::config("classical.matchings", "must not be empty"));
            }
        }
        if let Some(o) = &self.open {
            if o.kappas.is_empty() {
                return Err(CliError::config("open.kappas", "must not be empty"));
            }
            for (i, &k) in o.kappas.iter().enumerate() {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(CliError::config(&format!("open.kappas[{i}]"), "must be finite and non-negative"));
                }
            }
            positive("open.step", o.step)?;
            if !(o.auto_tail > 0.0 && o.auto_tail < 1.0) {
                return Err(CliError::config("open.auto_tail", "must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn mode_triple(&self) -> ModeTriple<f64> {
        ModeTriple::new(self.modes[0], self.modes[1], self.modes[2]).expect("validated")
    }

    /// Canonical JSON, as hashed into the manifest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

// Optional sections; each experiment uses a subset.
const KNOWN_SECTIONS: [&str; 10] = [
    "threshold",
    "init",
    "time",
    "grid",
    "sweep",
    "gamma",
    "purity",
    "gaps",
    "classical",
    "open",
];

fn merge(base: &mut Value, patch: Value, top: bool) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let replace = top && k == "init";
                match b.get_mut(&k) {
                    Some(slot) if !replace && slot.is_object() && v.is_object() => merge(slot, v, false),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, patch) => *slot = patch,
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(Value::String(s.into())).map_err(|_| format!("unknown experiment {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn every_default_validates() {
        for e in <Experiment as clap::ValueEnum>::value_variants() {
            ExperimentConfig::defaults(*e).validate().unwrap();
        }
    }

    #[test]
    fn overrides_merge_into_sections() {
        let c = ExperimentConfig::from_overrides(Experiment::Evolve, json!({"time": {"end": 5.0}})).unwrap();
        let t = c.time.unwrap();
        assert_eq!((t.end, t.step), (5.0, 0.01));
    }

    #[test]
    fn init_is_replaced_whole() {
        let c = ExperimentConfig::from_overrides(Experiment::Evolve, json!({"init": {"energy_quanta": [1.5, 3.5, 2.5]}}))
            .unwrap();
        assert_eq!(c.init, Some(InitSpec::EnergyQuanta([1.5, 3.5, 2.5])));
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = ExperimentConfig::from_overrides(Experiment::Evolve, json!({"time": {"ends": 5.0}})).unwrap_err();
        assert!(err.to_string().contains("time"), "{err}");
        assert!(err.to_string().contains("ends"), "{err}");
    }

    #[test]
    fn foreign_sections_are_rejected() {
        let err = ExperimentConfig::from_overrides(Experiment::Evolve, json!({"gaps": {}})).unwrap_err();
        assert!(err.to_string().contains("gaps"), "{err}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = ExperimentConfig::from_overrides(Experiment::FanoMap, json!({"grid": {"eps_h": {"points": 0}}}))
            .unwrap_err();
        assert!(err.to_string().contains("grid.eps_h.points"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::defaults(Experiment::Evolve);
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        b.seed += 1;
        assert_ne!(a.sha256(), b.sha256());
    }
}
