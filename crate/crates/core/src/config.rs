//! Layered TOML configuration with dotted keys.
//!
//! A [`Config`] starts from the checked-in defaults and applies each further
//! layer on top, key by key. Unknown keys are errors carrying their line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toml::de::{DeTable, DeValue};

use crate::bench::{BenchSpec, CostCoefficients};
use crate::campaign::{CampaignConfig, CapacitorSettings};
use crate::energy::{McuCatalog, McuProfile, WorkloadClass};
use crate::nvm::{InjectionMode, MemorySegment, QlCatalog, QlId, QualityLevel, SegmentCatalog};
use crate::runtime::{ChargePolicy, FailureSchedule, HarvestModel};

/// The configuration every run starts from.
pub const DEFAULT_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {msg}")]
    Syntax { origin: String, line: usize, msg: String },
    #[error("{origin}:{line}: unknown key `{key}`")]
    UnknownKey { origin: String, line: usize, key: String },
    #[error("missing key `{key}`")]
    MissingKey { key: String },
    #[error("{origin}:{line}: `{key}`: {msg}")]
    Invalid {
        origin: String,
        line: usize,
        key: String,
        msg: String,
    },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Array(Vec<Value>),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Bool(_) => "boolean",
            Value::Array(_) => "array",
        }
    }
}

/// One configuration text and where it came from.
#[derive(Debug, Clone)]
pub struct Layer {
    pub text: String,
    /// Shown in error messages.
    pub origin: String,
    /// Relative trace paths resolve against this directory.
    pub dir: Option<PathBuf>,
}

impl Layer {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: origin.into(),
            dir: None,
        }
    }

    pub fn defaults() -> Self {
        Self::new(DEFAULT_TOML, "<default>")
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self {
            text,
            origin: path.display().to_string(),
            dir: path.parent().map(Path::to_path_buf),
        })
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: Value,
    line: usize,
    layer: usize,
}

#[derive(Clone, Copy)]
enum Kind {
    Int,
    Num,
    Bool,
    Str,
    StrList,
}

const CAMPAIGN_KEYS: &[(&str, Kind)] = &[
    ("seed", Kind::Int),
    ("runs", Kind::Int),
    ("benchmarks", Kind::StrList),
    ("mcus", Kind::StrList),
    ("qls", Kind::StrList),
    ("workers", Kind::Int),
    ("skip_unfit", Kind::Bool),
    ("nn_batch", Kind::Int),
    ("are_threshold", Kind::Num),
    ("out", Kind::Str),
];

fn schema(path: &[&str]) -> Option<Kind> {
    match path {
        ["campaign", k] => CAMPAIGN_KEYS.iter().find(|(n, _)| n == k).map(|(_, kind)| *kind),
        ["injection", "mode"] => Some(Kind::Str),
        ["injection", "literal_q0"] => Some(Kind::Bool),
        ["runtime", "charge" | "harvest_trace" | "failure_schedule"] => Some(Kind::Str),
        ["runtime", "harvest_pW"] => Some(Kind::Num),
        ["capacitor", "v_on" | "v_off" | "margin" | "leak_pW_per_uF"] => Some(Kind::Num),
        ["cost", "mac" | "butterfly" | "pixel_op" | "cycles_per_mem_access"] => Some(Kind::Num),
        ["cost", "access_width_bits"] => Some(Kind::Int),
        ["ql", _, "wer" | "set_current_uA" | "write_energy_pJ"] => Some(Kind::Num),
        ["mcu", _, "clock_MHz" | "memory_KiB" | "active_power_uW_per_MHz" | "cycles_per_mem_access"] => Some(Kind::Num),
        ["mcu", _, "access_width_bits"] => Some(Kind::Int),
        ["mcu", _, "isa_factor", _] => Some(Kind::Num),
        ["segment", _, "ql"] => Some(Kind::Str),
        ["segment", _, "protected"] => Some(Kind::Bool),
        ["segment", _, "buffers"] => Some(Kind::StrList),
        _ => None,
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn convert(v: &DeValue<'_>) -> Result<Value, String> {
    Ok(match v {
        DeValue::String(s) => Value::Str(s.to_string()),
        DeValue::Integer(i) => Value::Int(i64::from_str_radix(i.as_str(), i.radix()).map_err(|e| e.to_string())?),
        DeValue::Float(f) => Value::Float(f.as_str().replace('_', "").parse::<f64>().map_err(|e| e.to_string())?),
        DeValue::Boolean(b) => Value::Bool(*b),
        DeValue::Array(a) => Value::Array(a.iter().map(|x| convert(x.get_ref())).collect::<Result<_, _>>()?),
        DeValue::Datetime(_) => return Err("datetimes are not supported".into()),
        DeValue::Table(_) => return Err("tables are only allowed as sections".into()),
    })
}

fn flatten(
    table: &DeTable<'_>,
    prefix: &mut Vec<String>,
    layer: &Layer,
    out: &mut Vec<(String, Entry)>,
    index: usize,
) -> Result<(), ConfigError> {
    for (k, v) in table.iter() {
        prefix.push(k.get_ref().to_string());
        let line = line_of(&layer.text, k.span().start);
        let key = prefix.join(".");
        match v.get_ref() {
            DeValue::Table(t) => flatten(t, prefix, layer, out, index)?,
            other => {
                let parts: Vec<&str> = prefix.iter().map(String::as_str).collect();
                let kind = schema(&parts).ok_or_else(|| ConfigError::UnknownKey {
                    origin: layer.origin.clone(),
                    line,
                    key: key.clone(),
                })?;
                let invalid = |msg: String| ConfigError::Invalid {
                    origin: layer.origin.clone(),
                    line,
                    key: key.clone(),
                    msg,
                };
                let value = convert(other).map_err(invalid)?;
                let ok = match (&kind, &value) {
                    (Kind::Int, Value::Int(_)) | (Kind::Bool, Value::Bool(_)) | (Kind::Str, Value::Str(_)) => true,
                    (Kind::Num, Value::Int(_) | Value::Float(_)) => true,
                    (Kind::StrList, Value::Array(a)) => a.iter().all(|x| matches!(x, Value::Str(_))),
                    _ => false,
                };
                if !ok {
                    let want = match kind {
                        Kind::Int => "an integer",
                        Kind::Num => "a number",
                        Kind::Bool => "a boolean",
                        Kind::Str => "a string",
                        Kind::StrList => "an array of strings",
                    };
                    return Err(invalid(format!("expected {want}, found {}", value.kind())));
                }
                out.push((key, Entry { value, line, layer: index }));
            }
        }
        prefix.pop();
    }
    Ok(())
}

/// Merged key/value view over all layers, later layers winning.
#[derive(Debug, Clone)]
pub struct Resolved {
    layers: Vec<Layer>,
    entries: BTreeMap<String, Entry>,
    /// Keys in first-seen order, used to keep catalog entries in file order.
    order: Vec<String>,
}

impl Resolved {
    pub fn parse(layers: Vec<Layer>) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut order = Vec::new();
        for (i, layer) in layers.iter().enumerate() {
            let doc = DeTable::parse(&layer.text).map_err(|e| ConfigError::Syntax {
                origin: layer.origin.clone(),
                line: e.span().map_or(0, |s| line_of(&layer.text, s.start)),
                msg: e.message().to_string(),
            })?;
            let mut flat = Vec::new();
            flatten(doc.get_ref(), &mut Vec::new(), layer, &mut flat, i)?;
            flat.sort_by_key(|(_, e)| e.line);
            for (k, e) in flat {
                if !entries.contains_key(&k) {
                    order.push(k.clone());
                }
                entries.insert(k, e);
            }
        }
        Ok(Self { layers, entries, order })
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key).map(|e| &e.value)
    }

    fn invalid(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        match self.entries.get(key) {
            Some(e) => ConfigError::Invalid {
                origin: self.layers[e.layer].origin.clone(),
                line: e.line,
                key: key.to_string(),
                msg: msg.into(),
            },
            None => ConfigError::MissingKey { key: key.to_string() },
        }
    }

    fn num(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    fn need_num(&self, key: &str) -> Result<f64, ConfigError> {
        self.num(key).ok_or_else(|| ConfigError::MissingKey { key: key.to_string() })
    }

    fn uint(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            Some(Value::Int(i)) => u64::try_from(*i).map(Some).map_err(|_| self.invalid(key, "must not be negative")),
            _ => Ok(None),
        }
    }

    fn boolean(&self, key: &str) -> Option<bool> {
        match self.get(key)? {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    fn string(&self, key: &str) -> Option<&str> {
        match self.get(key)? {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    fn strings(&self, key: &str) -> Option<Vec<&str>> {
        match self.get(key)? {
            Value::Array(a) => Some(
                a.iter()
                    .filter_map(|v| match v {
                        Value::Str(s) => Some(s.as_str()),
                        _ => None,
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        let raw = PathBuf::from(self.string(key)?);
        let layer = &self.layers[self.entries[key].layer];
        Some(match &layer.dir {
            Some(d) if raw.is_relative() => d.join(raw),
            _ => raw,
        })
    }

    /// The most recently set key under `prefix`, for locating catalog-level errors.
    fn last_key(&self, prefix: &str) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .max_by_key(|(_, e)| (e.layer, e.line))
            .map_or_else(|| prefix.to_string(), |(k, _)| k.clone())
    }

    /// Distinct second components of keys under `section`, in first-seen order.
    fn names(&self, section: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for k in &self.order {
            let mut parts = k.splitn(3, '.');
            if parts.next() == Some(section) {
                if let Some(n) = parts.next() {
                    if !out.iter().any(|o| o == n) {
                        out.push(n.to_string());
                    }
                }
            }
        }
        out
    }

    fn ql_catalog(&self) -> Result<QlCatalog, ConfigError> {
        let names = self.names("ql");
        if names.is_empty() {
            return Ok(QlCatalog::default());
        }
        for n in &names {
            if n.parse::<QlId>().is_err() {
                let key = self.order.iter().find(|k| k.starts_with(&format!("ql.{n}."))).expect("name came from a key");
                return Err(self.invalid(key, format!("unknown quality level `{n}` (expected Q0..Q4)")));
            }
        }
        let mut levels = Vec::with_capacity(5);
        for id in QlId::ALL {
            let k = |f: &str| format!("ql.{id}.{f}");
            levels.push(QualityLevel::new(
                id,
                self.need_num(&k("wer"))?,
                self.need_num(&k("set_current_uA"))?,
                self.need_num(&k("write_energy_pJ"))?,
            ));
        }
        let levels: [QualityLevel; 5] = levels.try_into().expect("five levels");
        QlCatalog::new(levels).map_err(|e| self.invalid(&self.last_key("ql."), e.to_string()))
    }

    fn mcu_catalog(&self) -> Result<McuCatalog, ConfigError> {
        let names = self.names("mcu");
        if names.is_empty() {
            return Ok(McuCatalog::default());
        }
        let mut profiles = Vec::with_capacity(names.len());
        for n in &names {
            let k = |f: &str| format!("mcu.{n}.{f}");
            let mut p = McuProfile::new(
                n,
                self.need_num(&k("clock_MHz"))?,
                self.need_num(&k("memory_KiB"))?,
                self.need_num(&k("active_power_uW_per_MHz"))?,
            );
            if let Some(v) = self.num(&k("cycles_per_mem_access")) {
                p.cycles_per_mem_access = v;
            }
            if let Some(v) = self.uint(&k("access_width_bits"))? {
                p.access_width_bits = u32::try_from(v).map_err(|_| self.invalid(&k("access_width_bits"), "too large"))?;
            }
            let prefix = k("isa_factor.");
            for key in self.order.iter().filter(|key| key.starts_with(&prefix)) {
                let w: WorkloadClass = key[prefix.len()..].parse().map_err(|e: String| self.invalid(key, e))?;
                p.isa_factors.insert(w, self.need_num(key)?);
            }
            p.validate().map_err(|e| self.invalid(&k("clock_MHz"), e.to_string()))?;
            profiles.push(p);
        }
        McuCatalog::new(profiles).map_err(|e| self.invalid(&self.last_key("mcu."), e.to_string()))
    }

    fn segments(&self) -> Result<SegmentCatalog, ConfigError> {
        let names = self.names("segment");
        if names.is_empty() {
            return Ok(SegmentCatalog::default());
        }
        let mut segments = Vec::new();
        let mut bindings = BTreeMap::new();
        for n in &names {
            let k = |f: &str| format!("segment.{n}.{f}");
            let ql_key = k("ql");
            let ql: QlId = self
                .string(&ql_key)
                .ok_or_else(|| ConfigError::MissingKey { key: ql_key.clone() })?
                .parse()
                .map_err(|e: crate::nvm::NvmError| self.invalid(&ql_key, e.to_string()))?;
            let protected = self.boolean(&k("protected")).unwrap_or(false);
            segments.push(MemorySegment::new(n.clone(), ql, protected).map_err(|e| self.invalid(&ql_key, e.to_string()))?);
            for b in self.strings(&k("buffers")).unwrap_or_default() {
                if let Some(prev) = bindings.insert(b.to_string(), n.clone()) {
                    return Err(self.invalid(&k("buffers"), format!("buffer `{b}` already bound to segment `{prev}`")));
                }
            }
        }
        SegmentCatalog::new(segments, bindings).map_err(|e| self.invalid(&self.last_key("segment."), e.to_string()))
    }

    fn campaign(&self) -> Result<CampaignConfig, ConfigError> {
        let mut c = CampaignConfig::default();
        let key = |k: &str| format!("campaign.{k}");
        if let Some(v) = self.uint(&key("seed"))? {
            c.seed = v;
        }
        if let Some(v) = self.uint(&key("runs"))? {
            if v == 0 {
                return Err(self.invalid(&key("runs"), "must be at least 1"));
            }
            c.runs = v as usize;
        }
        if let Some(v) = self.uint(&key("workers"))? {
            c.workers = v as usize;
        }
        if let Some(v) = self.uint(&key("nn_batch"))? {
            if v == 0 {
                return Err(self.invalid(&key("nn_batch"), "must be at least 1"));
            }
            c.nn_batch = v as usize;
        }
        if let Some(v) = self.boolean(&key("skip_unfit")) {
            c.skip_unfit = v;
        }
        if let Some(v) = self.num(&key("are_threshold")) {
            c.are_threshold = v;
        }
        if let Some(list) = self.strings(&key("benchmarks")) {
            c.benchmarks = list
                .iter()
                .map(|s| s.parse::<BenchSpec>().map_err(|e| self.invalid(&key("benchmarks"), e.to_string())))
                .collect::<Result<_, _>>()?;
        }
        if let Some(list) = self.strings(&key("mcus")) {
            c.mcus = list.iter().map(|s| s.to_string()).collect();
        }
        if let Some(list) = self.strings(&key("qls")) {
            c.qls = list
                .iter()
                .map(|s| s.parse::<QlId>().map_err(|e| self.invalid(&key("qls"), e.to_string())))
                .collect::<Result<_, _>>()?;
        }

        if let Some(m) = self.string("injection.mode") {
            c.injection.mode = m.parse::<InjectionMode>().map_err(|e| self.invalid("injection.mode", e.to_string()))?;
        }
        if let Some(v) = self.boolean("injection.literal_q0") {
            c.injection.literal_q0 = v;
        }

        if let Some(m) = self.string("runtime.charge") {
            c.charge = match m {
                "before-each-attempt" => ChargePolicy::BeforeEachAttempt,
                "on-brown-out" => ChargePolicy::OnBrownOut,
                other => {
                    return Err(self.invalid(
                        "runtime.charge",
                        format!("unknown policy `{other}` (expected before-each-attempt or on-brown-out)"),
                    ))
                }
            };
        }
        if let Some(p) = self.num("runtime.harvest_pW") {
            if !(p.is_finite() && p >= 0.0) {
                return Err(self.invalid("runtime.harvest_pW", "must be finite and non-negative"));
            }
            c.harvest = HarvestModel::Constant(p);
        }
        if let Some(path) = self.path("runtime.harvest_trace") {
            c.harvest = HarvestModel::load(&path).map_err(|e| self.invalid("runtime.harvest_trace", e.to_string()))?;
        }
        if let Some(path) = self.path("runtime.failure_schedule") {
            c.failures =
                FailureSchedule::load(&path).map_err(|e| self.invalid("runtime.failure_schedule", e.to_string()))?;
        }

        let d = CapacitorSettings::default();
        c.capacitor = CapacitorSettings {
            v_on: self.num("capacitor.v_on").unwrap_or(d.v_on),
            v_off: self.num("capacitor.v_off").unwrap_or(d.v_off),
            margin: self.num("capacitor.margin").unwrap_or(d.margin),
            leak_pw_per_uf: self.num("capacitor.leak_pW_per_uF").unwrap_or(d.leak_pw_per_uf),
        };
        if !(c.capacitor.v_on > c.capacitor.v_off && c.capacitor.v_off > 0.0) {
            return Err(self.invalid("capacitor.v_on", "need v_on > v_off > 0"));
        }
        if c.capacitor.margin < 1.0 {
            return Err(self.invalid("capacitor.margin", "must be at least 1"));
        }

        let d = CostCoefficients::default();
        c.cost = CostCoefficients {
            mac: self.num("cost.mac").unwrap_or(d.mac),
            butterfly: self.num("cost.butterfly").unwrap_or(d.butterfly),
            pixel_op: self.num("cost.pixel_op").unwrap_or(d.pixel_op),
        };
        for (k, v) in [("cost.mac", c.cost.mac), ("cost.butterfly", c.cost.butterfly), ("cost.pixel_op", c.cost.pixel_op)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(self.invalid(k, "must be finite and non-negative"));
            }
        }
        c.cycles_per_mem_access = self.num("cost.cycles_per_mem_access");
        if let Some(w) = self.uint("cost.access_width_bits")? {
            c.access_width_bits = Some(u32::try_from(w).map_err(|_| self.invalid("cost.access_width_bits", "too large"))?);
        }

        c.ql_catalog = self.ql_catalog()?;
        c.mcu_catalog = self.mcu_catalog()?;
        c.segments = self.segments()?;
        for m in &c.mcus {
            if c.mcu_catalog.get(m).is_err() {
                return Err(self.invalid(&key("mcus"), format!("unknown MCU `{m}`")));
            }
        }
        Ok(c)
    }
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub campaign: CampaignConfig,
    /// Directory campaign outputs are written to.
    pub out: PathBuf,
}

impl Config {
    /// Builds a configuration from `layers` alone, without the defaults underneath.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, ConfigError> {
        let r = Resolved::parse(layers)?;
        Ok(Self {
            campaign: r.campaign()?,
            out: PathBuf::from(r.string("campaign.out").unwrap_or("out")),
        })
    }

    pub fn defaults() -> Result<Self, ConfigError> {
        Self::from_layers(vec![Layer::defaults()])
    }

    /// The defaults with `text` applied on top.
    pub fn with_overlay(text: &str, origin: &str) -> Result<Self, ConfigError> {
        Self::from_layers(vec![Layer::defaults(), Layer::new(text, origin)])
    }

    /// The defaults with the file at `path` applied on top.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_layers(vec![Layer::defaults(), Layer::read(path)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_builtin_catalogs() {
        let c = Config::defaults().unwrap();
        assert_eq!(c.campaign.ql_catalog, QlCatalog::default());
        assert_eq!(c.campaign.mcu_catalog, McuCatalog::default());
        assert_eq!(c.campaign.segments, SegmentCatalog::default());
        assert_eq!(c.campaign.effective_qls(), CampaignConfig::default().effective_qls());
        let d = CampaignConfig::default();
        assert_eq!(c.campaign.benchmarks, d.benchmarks);
        assert_eq!(c.campaign.cost, d.cost);
        assert_eq!(c.campaign.capacitor, d.capacitor);
        assert_eq!(c.campaign.harvest, d.harvest);
        assert_eq!(c.out, PathBuf::from("out"));
    }

    #[test]
    fn overlay_replaces_single_keys() {
        let c = Config::with_overlay("campaign.runs = 7\n[ql.Q2]\nwer = 2e-5\n", "t.toml").unwrap();
        assert_eq!(c.campaign.runs, 7);
        assert_eq!(c.campaign.ql_catalog.get(QlId::Q2).wer, 2e-5);
        assert_eq!(c.campaign.ql_catalog.get(QlId::Q2).write_energy_per_bit_pj, 74.0);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = Config::with_overlay("[campaign]\nruns = 3\n\nrunz = 4\n", "user.toml").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                origin: "user.toml".into(),
                line: 4,
                key: "campaign.runz".into(),
            }
        );
        assert_eq!(err.to_string(), "user.toml:4: unknown key `campaign.runz`");
    }

    #[test]
    fn missing_catalog_field_names_the_key() {
        let text = "[mcu.X]\nclock_MHz = 8\nactive_power_uW_per_MHz = 100\n";
        let err = Config::from_layers(vec![Layer::new(text, "x.toml")]).unwrap_err();
        assert_eq!(err, ConfigError::MissingKey { key: "mcu.X.memory_KiB".into() });
        let err = Config::from_layers(vec![Layer::new("[ql.Q0]\nwer = 1e-8\n", "q.toml")]).unwrap_err();
        assert!(err.to_string().contains("ql.Q0.set_current_uA"), "{err}");
    }

    #[test]
    fn wrong_types_and_values_are_rejected() {
        let err = Config::with_overlay("campaign.runs = \"many\"", "t").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { line: 1, .. }), "{err}");
        let err = Config::with_overlay("campaign.qls = [\"Q9\"]", "t").unwrap_err();
        assert!(err.to_string().contains("Q9"), "{err}");
        let err = Config::with_overlay("[ql.Q7]\nwer = 0.1\n", "t").unwrap_err();
        assert!(err.to_string().contains("t:2"), "{err}");
        let err = Config::with_overlay("injection.mode = \"sideways\"", "t").unwrap_err();
        assert!(err.to_string().contains("sideways"), "{err}");
        let err = Config::with_overlay("campaign.mcus = [\"Z80\"]", "t").unwrap_err();
        assert!(err.to_string().contains("Z80"), "{err}");
        let err = Config::with_overlay("[ql.Q3]\nwer = 1e-2\n", "t").unwrap_err();
        assert!(err.to_string().contains("wer must increase"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = Config::with_overlay("[campaign]\nruns = = 3\n", "bad.toml").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn segments_bind_buffers() {
        let text = "[segment.fft]\nql = \"Q0\"\nbuffers = [\"fft_out\"]\n";
        let c = Config::with_overlay(text, "s").unwrap();
        assert_eq!(c.campaign.segments.lookup("fft_out").unwrap().name, "fft");
        assert_eq!(c.campaign.segments.lookup("other").unwrap().name, "approx");
        assert!(c.campaign.segments.lookup("task_control_block").unwrap().protected);
        let dup = "[segment.fft]\nql = \"Q0\"\nbuffers = [\"*\"]\n";
        assert!(Config::with_overlay(dup, "s").is_err());
        let bad = "[segment.guard]\nql = \"Q2\"\nprotected = true\n";
        assert!(Config::with_overlay(bad, "s").is_err());
    }

    #[test]
    fn mcu_entries_keep_file_order_and_factors() {
        let c = Config::defaults().unwrap();
        let names = c.campaign.mcu_catalog.names();
        assert_eq!(names, ["MSP430G", "MSP430L", "MSP430S", "M0", "M33", "M4", "M7"]);
        let m0 = c.campaign.mcu_catalog.get("M0").unwrap();
        assert_eq!(m0.isa_cycle_factor(WorkloadClass::NnQuant), 20.0);
        assert_eq!(m0.isa_cycle_factor(WorkloadClass::Signal), 1.0);
    }

    #[test]
    fn trace_paths_resolve_against_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("h.txt"), "0, 5e6\n10, 7e6\n").unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, "runtime.harvest_trace = \"h.txt\"\n").unwrap();
        let c = Config::load(&cfg).unwrap();
        assert_eq!(c.campaign.harvest, HarvestModel::Trace(vec![(0.0, 5e6), (10.0, 7e6)]));
    }
}
