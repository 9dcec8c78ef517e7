//! Layered run configuration: module defaults, overridden by a flat
//! `key = value` config file, overridden by `--set key=value` flags. Every
//! tunable across the tracker, flow, model, and training modules is
//! addressable by a dotted key, unknown keys are rejected with a spelling
//! suggestion, and the fully resolved table can be snapshotted into the run
//! directory so a run's exact settings are always on disk.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mmkit_flow::FlowConfig;
use mmkit_model::ModelConfig;
use mmkit_pipeline::TrainConfig;
use mmkit_track::TrackerConfig;

use crate::error::{CliError, Result};

/// Every module's tunables, resolved from defaults, config file, and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub tracker: TrackerConfig,
    pub flow: FlowConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        ResolvedConfig {
            tracker: TrackerConfig::default(),
            flow: FlowConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// A parsed value of one of the kinds a key can take.
enum Value {
    Usize(usize),
    U32(u32),
    U64(u64),
    F64(f64),
    Bool(bool),
    Stages([usize; 4]),
}

impl Value {
    fn usize(&self) -> usize {
        match self {
            Value::Usize(v) => *v,
            _ => unreachable!("kind checked at parse time"),
        }
    }
    fn u32(&self) -> u32 {
        match self {
            Value::U32(v) => *v,
            _ => unreachable!("kind checked at parse time"),
        }
    }
    fn u64(&self) -> u64 {
        match self {
            Value::U64(v) => *v,
            _ => unreachable!("kind checked at parse time"),
        }
    }
    fn f64(&self) -> f64 {
        match self {
            Value::F64(v) => *v,
            _ => unreachable!("kind checked at parse time"),
        }
    }
    fn bool(&self) -> bool {
        match self {
            Value::Bool(v) => *v,
            _ => unreachable!("kind checked at parse time"),
        }
    }
    fn stages(&self) -> [usize; 4] {
        match self {
            Value::Stages(v) => *v,
            _ => unreachable!("kind checked at parse time"),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Usize,
    U32,
    U64,
    F64,
    Bool,
    Stages,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Usize | Kind::U32 | Kind::U64 => "a non-negative integer",
            Kind::F64 => "a number",
            Kind::Bool => "true or false",
            Kind::Stages => "four comma-separated non-negative integers",
        }
    }

    fn parse(self, key: &str, text: &str) -> Result<Value> {
        let text = text.trim();
        let mismatch = || {
            CliError::validation(format!(
                "key '{key}' expects {}, got '{text}'",
                self.describe()
            ))
        };
        match self {
            Kind::Usize => text.parse().map(Value::Usize).map_err(|_| mismatch()),
            Kind::U32 => text.parse().map(Value::U32).map_err(|_| mismatch()),
            Kind::U64 => text.parse().map(Value::U64).map_err(|_| mismatch()),
            Kind::F64 => match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Value::F64(v)),
                _ => Err(mismatch()),
            },
            Kind::Bool => text.parse().map(Value::Bool).map_err(|_| mismatch()),
            Kind::Stages => {
                let parts: Vec<&str> = text.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(mismatch());
                }
                let mut stages = [0usize; 4];
                for (slot, part) in stages.iter_mut().zip(&parts) {
                    *slot = part.parse().map_err(|_| mismatch())?;
                }
                Ok(Value::Stages(stages))
            }
        }
    }
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    set: fn(&mut ResolvedConfig, &Value),
    get: fn(&ResolvedConfig) -> String,
}

macro_rules! key {
    ($name:literal, Usize, $($path:ident).+) => {
        KeySpec {
            name: $name,
            kind: Kind::Usize,
            set: |c, v| c.$($path).+ = v.usize(),
            get: |c| c.$($path).+.to_string(),
        }
    };
    ($name:literal, U32, $($path:ident).+) => {
        KeySpec {
            name: $name,
            kind: Kind::U32,
            set: |c, v| c.$($path).+ = v.u32(),
            get: |c| c.$($path).+.to_string(),
        }
    };
    ($name:literal, U64, $($path:ident).+) => {
        KeySpec {
            name: $name,
            kind: Kind::U64,
            set: |c, v| c.$($path).+ = v.u64(),
            get: |c| c.$($path).+.to_string(),
        }
    };
    ($name:literal, F64, $($path:ident).+) => {
        KeySpec {
            name: $name,
            kind: Kind::F64,
            set: |c, v| c.$($path).+ = v.f64(),
            get: |c| format!("{}", c.$($path).+),
        }
    };
    ($name:literal, Bool, $($path:ident).+) => {
        KeySpec {
            name: $name,
            kind: Kind::Bool,
            set: |c, v| c.$($path).+ = v.bool(),
            get: |c| c.$($path).+.to_string(),
        }
    };
    ($name:literal, Stages, $($path:ident).+) => {
        KeySpec {
            name: $name,
            kind: Kind::Stages,
            set: |c, v| c.$($path).+ = v.stages(),
            get: |c| {
                let s = c.$($path).+;
                format!("{},{},{},{}", s[0], s[1], s[2], s[3])
            },
        }
    };
}

fn registry() -> Vec<KeySpec> {
    vec![
        key!("tracker.nms_iou_threshold", F64, tracker.nms_iou_threshold),
        key!("tracker.min_confidence", F64, tracker.min_confidence),
        key!("tracker.lambda", F64, tracker.lambda),
        key!("tracker.max_cost", F64, tracker.max_cost),
        key!("tracker.confirm_hits", U32, tracker.confirm_hits),
        key!("tracker.max_misses", U32, tracker.max_misses),
        key!("tracker.process_noise", F64, tracker.process_noise),
        key!("tracker.measurement_noise", F64, tracker.measurement_noise),
        key!("flow.pyramid_levels", Usize, flow.pyramid_levels),
        key!("flow.pyramid_scale", F64, flow.pyramid_scale),
        key!("flow.window_size", Usize, flow.window_size),
        key!("flow.iterations", Usize, flow.iterations),
        key!("flow.poly_n", Usize, flow.poly_n),
        key!("flow.poly_sigma", F64, flow.poly_sigma),
        key!("vivit.tubelet", Usize, model.vivit.tubelet),
        key!("vivit.patch", Usize, model.vivit.patch),
        key!("vivit.d", Usize, model.vivit.d),
        key!("vivit.heads", Usize, model.vivit.heads),
        key!("vivit.blocks", Usize, model.vivit.blocks),
        key!("vivit.mlp_ratio", Usize, model.vivit.mlp_ratio),
        key!("vivit.frames", Usize, model.vivit.frames),
        key!("vivit.side", Usize, model.vivit.side),
        key!("cnn.stem", Usize, model.cnn.stem),
        key!("cnn.stages", Stages, model.cnn.stages),
        key!("cnn.blocks_per_stage", Usize, model.cnn.blocks_per_stage),
        key!("cnn.frames", Usize, model.cnn.frames),
        key!("lstm.layers", Usize, model.lstm.layers),
        key!("lstm.hidden", Usize, model.lstm.hidden),
        key!("lstm.input_dim", Usize, model.lstm.input_dim),
        key!("lstm.frames", Usize, model.lstm.frames),
        key!("fusion.d_f", Usize, model.fusion.d_f),
        key!("fusion.heads", Usize, model.fusion.heads),
        key!("fusion.w_action", F64, model.fusion.w_action),
        key!("fusion.w_asd", F64, model.fusion.w_asd),
        key!("train.epochs", Usize, train.epochs),
        key!("train.batch_size", Usize, train.batch_size),
        key!("train.learning_rate", F64, train.learning_rate),
        key!("train.beta1", F64, train.beta1),
        key!("train.beta2", F64, train.beta2),
        key!("train.adam_eps", F64, train.adam_eps),
        key!("train.seed", U64, train.seed),
        key!("train.augment", Bool, train.augment),
        key!("train.w_action", F64, train.w_action),
        key!("train.w_asd", F64, train.w_asd),
        key!("train.split_ratio", F64, train.split_ratio),
    ]
}

/// Edit distance used only to suggest a close key name on a typo.
fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn unknown_key_error(keys: &[KeySpec], key: &str) -> CliError {
    let best = keys
        .iter()
        .map(|spec| (levenshtein(key, spec.name), spec.name))
        .min()
        .expect("registry is non-empty");
    let mut msg = format!("unknown config key '{key}'");
    if best.0 <= 3 {
        let _ = write!(msg, "; did you mean '{}'?", best.1);
    }
    CliError::validation(msg)
}

impl ResolvedConfig {
    /// Apply one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let keys = registry();
        match keys.iter().find(|spec| spec.name == key) {
            Some(spec) => {
                let parsed = spec.kind.parse(key, value)?;
                (spec.set)(self, &parsed);
                Ok(())
            }
            None => Err(unknown_key_error(&keys, key)),
        }
    }

    /// Apply a config file: one `key = value` per line, `#` comments and
    /// blank lines ignored. An empty file leaves every default in place.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("config file {}: {e}", path.display())))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::validation(format!(
                    "config file {} line {}: expected 'key = value', got '{line}'",
                    path.display(),
                    i + 1
                )));
            };
            self.set(key.trim(), value.trim()).map_err(|e| {
                CliError::validation(format!(
                    "config file {} line {}: {}",
                    path.display(),
                    i + 1,
                    e.message
                ))
            })?;
        }
        Ok(())
    }

    /// Apply `--set key=value` flags, in order.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for item in overrides {
            let Some((key, value)) = item.split_once('=') else {
                return Err(CliError::validation(format!(
                    "--set '{item}': expected key=value"
                )));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// The full resolved table, one `key = value` line per tunable, sorted by
    /// key. Feeding the snapshot back through [`apply_file`] reproduces the
    /// same configuration.
    pub fn snapshot(&self) -> String {
        let mut lines: Vec<String> = registry()
            .iter()
            .map(|spec| format!("{} = {}", spec.name, (spec.get)(self)))
            .collect();
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    /// Resolve from optional file plus `--set` overrides, in that precedence
    /// order: defaults < file < overrides.
    pub fn resolve(config_file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = ResolvedConfig::default();
        if let Some(path) = config_file {
            cfg.apply_file(path)?;
        }
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    }

    /// Validate every module's constraints at once.
    pub fn validate(&self) -> Result<()> {
        self.tracker.validate().map_err(CliError::from)?;
        self.flow.validate().map_err(CliError::from)?;
        self.model.validate().map_err(CliError::from)?;
        self.train.validate().map_err(CliError::from)?;
        Ok(())
    }
}

/// Write the resolved snapshot into a run directory as `config.resolved`.
pub fn write_snapshot(dir: &Path, cfg: &ResolvedConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    let path = dir.join("config.resolved");
    fs::write(&path, cfg.snapshot())
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    Ok(())
}
