//! Run configuration: a TOML document with `model`, `placement`, `run` and
//! `output` sections. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::couplings::{build_couplings, ideal_placement, CouplingSet, Placement, WaveguideGeometry};
use crate::dynamics::{ModelSpec, SqueezedReservoir};
use crate::spin::{HalfInt, N_MAX_FULL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Steady,
    Qfunc,
    SweepR,
    Scaling,
    Disorder,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Steady => "steady",
            Command::Qfunc => "qfunc",
            Command::SweepR => "sweep-r",
            Command::Scaling => "scaling",
            Command::Disorder => "disorder",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Symmetric Dicke sector.
    Collective,
    /// Product basis with position-dependent couplings.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Trajectory,
    Steady,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub n: usize,
    /// Squeezing strength. `evolve` also accepts a list through `r_values`.
    pub r: f64,
    pub r_values: Option<Vec<f64>>,
    pub alpha: f64,
    /// Detuning, in units of `a`.
    pub delta: f64,
    /// Collective rate.
    pub a: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::Collective,
            n: 10,
            r: 0.5,
            r_values: None,
            alpha: 0.5,
            delta: 1.0,
            a: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementSection {
    /// Waveguide mode frequencies; only `zeta` matters once positions are
    /// given in its units.
    pub omega0: f64,
    pub omega11: f64,
    /// Explicit positions in units of `zeta`; ideal `2 pi zeta i` when absent.
    pub z: Option<Vec<f64>>,
    /// Disorder strength in units of `pi zeta`.
    pub w: f64,
    /// Several strengths for `disorder`.
    pub w_values: Option<Vec<f64>>,
    pub n_configs: usize,
}

impl Default for PlacementSection {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            omega11: 0.5,
            z: None,
            w: 0.0,
            w_values: None,
            n_configs: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Initial Dicke projections; `|j,-j>` (all emitters in the ground state)
    /// when absent.
    pub initial_m: Option<Vec<f64>>,
    pub t_end: f64,
    pub n_times: usize,
    /// `qfunc` snapshot times.
    pub snapshot_times: Vec<f64>,
    pub q_grid: [usize; 2],
    /// Side of the planar projection grid; 0 disables it.
    pub planar_points: usize,
    pub planar_extent: f64,
    pub r_max: f64,
    pub r_step: f64,
    /// Emitter numbers for `sweep-r` and `scaling`.
    pub n_values: Option<Vec<usize>>,
    /// Add the Liouvillian-nullspace value next to the analytic one in `sweep-r`.
    pub numeric_check: bool,
    pub ensemble: EnsembleKind,
    /// Steady-state ensembles use this many configurations when set.
    pub steady_configs: Option<usize>,
    /// Extra disorder strengths for steady-state ensembles only.
    pub steady_w_values: Option<Vec<f64>>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            initial_m: None,
            t_end: 20.0,
            n_times: 201,
            snapshot_times: vec![0.0],
            q_grid: [181, 361],
            planar_points: 101,
            planar_extent: 1.0,
            r_max: 2.0,
            r_step: 0.02,
            n_values: None,
            numeric_check: false,
            ensemble: EnsembleKind::Both,
            steady_configs: None,
            steady_w_values: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// File-name prefix; the command name when absent.
    pub prefix: Option<String>,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: ".".into(),
            prefix: None,
            format: Format::Csv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub placement: PlacementSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Field-specific configuration error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

fn bad(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

/// Document with an optional `command`, so a subcommand can supply it.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Command>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    placement: PlacementSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    output: OutputSection,
}

/// Command-line values that take precedence over the document.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub format: Option<Format>,
    pub n: Option<usize>,
    pub r: Option<f64>,
    pub w: Option<f64>,
}

/// Parses and validates. `command` fills in (or must agree with) the
/// document's own command.
pub fn parse_config(text: &str, command: Option<Command>) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, command, &Overrides::default())
}

pub fn parse_config_with(text: &str, command: Option<Command>, ov: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    if let Some(seed) = ov.seed {
        raw.seed = seed;
    }
    if let Some(dir) = &ov.out {
        raw.output.dir = dir.clone();
    }
    if let Some(f) = ov.format {
        raw.output.format = f;
    }
    if let Some(n) = ov.n {
        raw.model.n = n;
    }
    if let Some(r) = ov.r {
        raw.model.r = r;
        raw.model.r_values = None;
    }
    if let Some(w) = ov.w {
        raw.placement.w = w;
        raw.placement.w_values = None;
    }
    let command = match (raw.command, command) {
        (Some(a), Some(b)) if a != b => {
            return Err(bad(
                "command",
                format!("document says '{}' but '{}' was requested", a.name(), b.name()),
            ))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(bad("command", "missing")),
    };
    let cfg = RunConfig {
        command,
        seed: raw.seed,
        model: raw.model,
        placement: raw.placement,
        run: raw.run,
        output: raw.output,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn check_r(field: &str, r: f64) -> Result<(), ConfigError> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("squeezing strength must be >= 0, got {r}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if m.n == 0 {
            return Err(bad("model.n", "need at least one emitter"));
        }
        check_r("model.r", m.r)?;
        for &r in m.r_values.iter().flatten() {
            check_r("model.r_values", r)?;
        }
        if !m.alpha.is_finite() {
            return Err(bad("model.alpha", "must be finite"));
        }
        if !m.delta.is_finite() {
            return Err(bad("model.delta", "must be finite"));
        }
        if !(m.a > 0.0 && m.a.is_finite()) {
            return Err(bad("model.a", format!("collective rate must be positive, got {}", m.a)));
        }
        let full = m.kind == ModelKind::Full || self.command == Command::Disorder;
        if full && m.n > N_MAX_FULL {
            return Err(bad("model.n", format!("the full model supports N <= {N_MAX_FULL}, got {}", m.n)));
        }
        let p = &self.placement;
        self.geometry()?;
        if let Some(z) = &p.z {
            if z.len() != m.n {
                return Err(bad("placement.z", format!("expected {} positions, got {}", m.n, z.len())));
            }
            if z.iter().any(|x| !x.is_finite()) {
                return Err(bad("placement.z", "positions must be finite"));
            }
        }
        for &w in std::iter::once(&p.w)
            .chain(p.w_values.iter().flatten())
            .chain(self.run.steady_w_values.iter().flatten())
        {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(bad("placement.w", format!("disorder strength must be >= 0, got {w}")));
            }
        }
        if p.n_configs == 0 || self.run.steady_configs == Some(0) {
            return Err(bad("placement.n_configs", "need at least one configuration"));
        }
        let r = &self.run;
        if !(r.t_end >= 0.0 && r.t_end.is_finite()) {
            return Err(bad("run.t_end", format!("must be >= 0, got {}", r.t_end)));
        }
        if r.n_times < 2 {
            return Err(bad("run.n_times", "need at least 2 samples"));
        }
        if r.snapshot_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(bad("run.snapshot_times", "times must be >= 0"));
        }
        if r.q_grid.iter().any(|&k| k < 3) {
            return Err(bad("run.q_grid", "need at least 3 points per angle"));
        }
        if r.planar_points == 1 || !(r.planar_extent > 0.0 && r.planar_extent <= 1.0) {
            return Err(bad("run.planar_points", "need 0 or >= 2 points and 0 < planar_extent <= 1"));
        }
        if !(r.r_step > 0.0 && r.r_max >= r.r_step && r.r_max.is_finite()) {
            return Err(bad("run.r_step", "need 0 < r_step <= r_max"));
        }
        if r.n_values.as_ref().is_some_and(|v| v.iter().any(|&n| n < 2)) {
            return Err(bad("run.n_values", "need N >= 2"));
        }
        for m0 in r.initial_m.iter().flatten() {
            let hm = HalfInt::from_f64(*m0).map_err(|e| bad("run.initial_m", e))?;
            if hm.twice().unsigned_abs() as usize > m.n || (hm.twice() + m.n as i64) % 2 != 0 {
                return Err(bad("run.initial_m", format!("{m0} is not a projection of j = {}", m.n as f64 / 2.0)));
            }
        }
        Ok(())
    }

    /// Geometry with collective rate `model.a`.
    pub fn geometry(&self) -> Result<WaveguideGeometry, ConfigError> {
        let mut g = WaveguideGeometry::normalized(self.placement.omega0, self.placement.omega11)
            .map_err(|e| bad("placement", e))?;
        g.gamma11 *= self.model.a;
        Ok(g)
    }

    pub fn reservoir(&self, r: f64) -> Result<SqueezedReservoir, ConfigError> {
        SqueezedReservoir::new(r, self.model.alpha).map_err(|e| bad("model", e))
    }

    pub fn r_values(&self) -> Vec<f64> {
        self.model.r_values.clone().unwrap_or_else(|| vec![self.model.r])
    }

    pub fn w_values(&self) -> Vec<f64> {
        self.placement.w_values.clone().unwrap_or_else(|| vec![self.placement.w])
    }

    /// Strengths for steady ensembles: `w_values` merged with
    /// `run.steady_w_values`, sorted and deduplicated.
    pub fn steady_w_values(&self) -> Vec<f64> {
        let mut w = self.w_values();
        w.extend(self.run.steady_w_values.iter().flatten());
        w.sort_by(f64::total_cmp);
        w.dedup();
        w
    }

    pub fn initial_m(&self) -> Vec<f64> {
        self.run
            .initial_m
            .clone()
            .unwrap_or_else(|| vec![-(self.model.n as f64) / 2.0])
    }

    pub fn placement(&self) -> Result<Placement, ConfigError> {
        let g = self.geometry()?;
        match &self.placement.z {
            Some(z) => Placement::new(z.iter().map(|x| x * g.zeta()).collect()),
            None => ideal_placement(self.model.n, &g),
        }
        .map_err(|e| bad("placement", e))
    }

    pub fn couplings(&self) -> Result<CouplingSet, ConfigError> {
        build_couplings(&self.geometry()?, &self.placement()?).map_err(|e| bad("placement", e))
    }

    pub fn model_spec(&self, r: f64) -> Result<ModelSpec, ConfigError> {
        let res = self.reservoir(r)?;
        match self.model.kind {
            ModelKind::Collective => ModelSpec::collective(self.model.n, self.model.a, self.model.delta, res),
            ModelKind::Full => ModelSpec::full(self.couplings()?, self.model.delta, res),
        }
        .map_err(|e| bad("model", e))
    }

    /// Serialized form written into output metadata.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn prefix(&self) -> String {
        self.output
            .prefix
            .clone()
            .unwrap_or_else(|| self.command.name().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("command = \"steady\"\n[model]\nn = 10\nr = 0.5\n", None).unwrap();
        assert_eq!(cfg.command, Command::Steady);
        assert_eq!(cfg.model.delta, 1.0);
        assert_eq!(cfg.model.alpha, 0.5);
        assert_eq!(cfg.model.a, 1.0);
        assert_eq!(cfg.model.kind, ModelKind::Collective);
    }

    #[test]
    fn negative_r_is_a_range_error() {
        let err = parse_config("[model]\nr = -0.1\n", Some(Command::Steady)).unwrap_err();
        assert!(err.0.contains("model.r"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("command = \"steady\"\n[model]\nnn = 3\n", None).is_err());
        assert!(parse_config("command = \"steady\"\nsede = 3\n", None).is_err());
    }

    #[test]
    fn command_must_agree() {
        assert!(parse_config("command = \"steady\"\n", Some(Command::Evolve)).is_err());
        assert!(parse_config("", None).is_err());
        assert_eq!(parse_config("", Some(Command::Qfunc)).unwrap().command, Command::Qfunc);
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides {
            n: Some(6),
            r: Some(0.2),
            ..Default::default()
        };
        let cfg = parse_config_with("[model]\nn = 10\nr_values = [0.1, 0.5]\n", Some(Command::Evolve), &ov).unwrap();
        assert_eq!(cfg.model.n, 6);
        assert_eq!(cfg.r_values(), vec![0.2]);
        let bad_r = Overrides {
            r: Some(-1.0),
            ..Default::default()
        };
        assert!(parse_config_with("", Some(Command::Steady), &bad_r).is_err());
    }

    #[test]
    fn json_echo_round_trips() {
        let cfg = parse_config(
            "command = \"disorder\"\nseed = 9\n[model]\nn = 4\n[placement]\nw_values = [0.0, 0.1]\n",
            None,
        )
        .unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn full_model_size_is_bounded() {
        assert!(parse_config("command = \"disorder\"\n[model]\nn = 12\n", None).is_err());
        assert!(parse_config("command = \"steady\"\n[model]\nn = 40\n", None).is_ok());
    }

    #[test]
    fn initial_projection_must_exist() {
        assert!(parse_config("command = \"evolve\"\n[run]\ninitial_m = [0.5]\n", None).is_err());
        assert!(parse_config("command = \"evolve\"\n[run]\ninitial_m = [-5, 0, 5]\n", None).is_ok());
    }
}
