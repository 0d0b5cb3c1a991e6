//! Run configuration: a TOML file with one section per subcommand, overridden
//! by command-line flags of the same names.
//!
//! Physical inputs always carry their unit in the key: `dx_m` or
//! `dx_internal`, `dt_s` or `dt_internal`, `lambda_si` or `lambda_internal`.
//! Giving two forms of one quantity in the same source is an error; a flag
//! replaces every form of its quantity from the file.

use std::collections::BTreeMap;
use std::path::Path;

use grwlab_core::{UnitSystem, HBAR_SI, NUCLEON_MASS_KG};
use serde_json::{Map, Value as Json};

use crate::error::{IoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Length,
    Time,
    Rate,
    Mass,
    Momentum,
    Frequency,
    LengthList,
    Real,
    Count,
    Flag,
    Text,
}

impl Kind {
    /// Suffix of the SI form, for quantities that also have an internal form.
    pub fn si_suffix(self) -> Option<&'static str> {
        match self {
            Kind::Length | Kind::LengthList => Some("m"),
            Kind::Time => Some("s"),
            Kind::Rate | Kind::Mass | Kind::Momentum | Kind::Frequency => Some("si"),
            Kind::Real | Kind::Count | Kind::Flag | Kind::Text => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Default {
    Required,
    Unset,
    Si(f64),
    Internal(f64),
    Real(f64),
    Count(u64),
    Flag(bool),
    Text(&'static str),
    InternalList(&'static [f64]),
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub base: &'static str,
    pub kind: Kind,
    pub default: Default,
    pub help: &'static str,
}

impl Param {
    pub const fn new(base: &'static str, kind: Kind, default: Default, help: &'static str) -> Self {
        Self {
            base,
            kind,
            default,
            help,
        }
    }

    /// Accepted keys, SI form first.
    pub fn keys(&self) -> Vec<String> {
        match self.kind.si_suffix() {
            Some(s) => vec![format!("{}_{s}", self.base), format!("{}_internal", self.base)],
            None => vec![self.base.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    List(Vec<f64>),
    Flag(bool),
    Text(String),
}

impl Value {
    fn to_json(&self) -> Json {
        match self {
            Value::Num(v) => serde_json::Number::from_f64(*v).map_or(Json::Null, Json::Number),
            Value::List(v) => Json::Array(
                v.iter()
                    .map(|x| serde_json::Number::from_f64(*x).map_or(Json::Null, Json::Number))
                    .collect(),
            ),
            Value::Flag(b) => Json::Bool(*b),
            Value::Text(s) => Json::String(s.clone()),
        }
    }
}

fn bad(key: &str, what: &str) -> IoError {
    IoError::Config(format!("{key}: expected {what}"))
}

fn kind_what(kind: Kind) -> &'static str {
    match kind {
        Kind::LengthList => "a list of numbers",
        Kind::Count => "a non-negative integer",
        Kind::Flag => "true or false",
        Kind::Text => "a string",
        _ => "a number",
    }
}

fn check_count(key: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v)
    } else {
        Err(bad(key, "a non-negative integer"))
    }
}

fn parse_toml(key: &str, kind: Kind, v: &toml::Value) -> Result<Value> {
    let num = |v: &toml::Value| match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    };
    let out = match kind {
        Kind::Flag => Value::Flag(v.as_bool().ok_or_else(|| bad(key, kind_what(kind)))?),
        Kind::Text => Value::Text(v.as_str().ok_or_else(|| bad(key, kind_what(kind)))?.to_string()),
        Kind::LengthList => {
            let arr = v.as_array().ok_or_else(|| bad(key, kind_what(kind)))?;
            Value::List(arr.iter().map(|x| num(x).ok_or_else(|| bad(key, kind_what(kind)))).collect::<Result<_>>()?)
        }
        Kind::Count => Value::Num(check_count(key, num(v).ok_or_else(|| bad(key, kind_what(kind)))?)?),
        _ => Value::Num(num(v).ok_or_else(|| bad(key, kind_what(kind)))?),
    };
    Ok(out)
}

fn parse_str(key: &str, kind: Kind, s: &str) -> Result<Value> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(key, kind_what(kind)));
    let out = match kind {
        Kind::Flag => Value::Flag(match s.trim() {
            "true" => true,
            "false" => false,
            _ => return Err(bad(key, kind_what(kind))),
        }),
        Kind::Text => Value::Text(s.to_string()),
        Kind::LengthList => Value::List(s.split(',').map(num).collect::<Result<_>>()?),
        Kind::Count => Value::Num(check_count(key, num(s)?)?),
        _ => Value::Num(num(s)?),
    };
    Ok(out)
}

/// A parsed TOML config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub threads: Option<String>,
    pub out: Option<String>,
    sections: BTreeMap<String, toml::Table>,
}

pub const TOP_LEVEL_KEYS: [&str; 3] = ["seed", "threads", "out"];

impl ConfigFile {
    pub fn parse(text: &str, known_sections: &[&str]) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| IoError::Config(format!("{e}")))?;
        let mut cfg = ConfigFile::default();
        for (k, v) in table {
            match (k.as_str(), v) {
                ("seed", toml::Value::Integer(i)) if i >= 0 => cfg.seed = Some(i as u64),
                ("seed", _) => return Err(bad("seed", "a non-negative integer")),
                ("threads", toml::Value::Integer(i)) => cfg.threads = Some(i.to_string()),
                ("threads", toml::Value::String(s)) => cfg.threads = Some(s),
                ("threads", _) => return Err(bad("threads", "an integer or \"auto\"")),
                ("out", toml::Value::String(s)) => cfg.out = Some(s),
                ("out", _) => return Err(bad("out", "a path string")),
                (name, toml::Value::Table(t)) if known_sections.contains(&name) => {
                    cfg.sections.insert(name.to_string(), t);
                }
                (name, _) => return Err(IoError::Config(format!("unknown top-level key or section {name:?}"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, known_sections: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        Self::parse(&text, known_sections)
    }

    pub fn section(&self, name: &str) -> Option<&toml::Table> {
        self.sections.get(name)
    }
}

/// Values from one source, keyed by quantity.
type Source = BTreeMap<&'static str, Vec<(String, Value)>>;

fn collect_file(params: &[Param], section: Option<&toml::Table>, name: &str) -> Result<Source> {
    let mut out = Source::new();
    let Some(table) = section else { return Ok(out) };
    for (key, v) in table {
        let p = params
            .iter()
            .find(|p| p.keys().iter().any(|k| k == key))
            .ok_or_else(|| {
                IoError::Config(format!("unknown key {key:?} in [{name}] (physical quantities need a unit suffix)"))
            })?;
        out.entry(p.base).or_default().push((key.clone(), parse_toml(key, p.kind, v)?));
    }
    Ok(out)
}

/// Resolved settings for one subcommand.
#[derive(Debug, Clone)]
pub struct Settings {
    pub units: UnitSystem,
    params: Vec<Param>,
    chosen: BTreeMap<&'static str, (String, Value)>,
    echo: Map<String, Json>,
}

impl Settings {
    /// Merges file values with flag values (flags win per quantity) and
    /// resolves the unit system.
    pub fn resolve(
        params: &[Param],
        section_name: &str,
        file: Option<&toml::Table>,
        flags: &[(String, String)],
    ) -> Result<Self> {
        let from_file = collect_file(params, file, section_name)?;
        let mut from_flags = Source::new();
        for (key, raw) in flags {
            let p = params
                .iter()
                .find(|p| p.keys().iter().any(|k| k == key))
                .ok_or_else(|| IoError::Config(format!("unknown flag --{}", key.replace('_', "-"))))?;
            from_flags.entry(p.base).or_default().push((key.clone(), parse_str(key, p.kind, raw)?));
        }
        let mut chosen = BTreeMap::new();
        for p in params {
            let given = from_flags.get(p.base).or_else(|| from_file.get(p.base));
            if let Some(forms) = given {
                if forms.len() > 1 {
                    let keys: Vec<&str> = forms.iter().map(|f| f.0.as_str()).collect();
                    return Err(IoError::Config(format!(
                        "{} given in mixed forms: {}",
                        p.base,
                        keys.join(", ")
                    )));
                }
                chosen.insert(p.base, forms[0].clone());
                continue;
            }
            let keys = p.keys();
            let default = match p.default {
                Default::Required => {
                    return Err(IoError::Config(format!("missing required setting {}", keys.join(" or "))))
                }
                Default::Unset => continue,
                Default::Si(v) => (keys[0].clone(), Value::Num(v)),
                Default::Internal(v) => (keys[keys.len() - 1].clone(), Value::Num(v)),
                Default::Real(v) => (keys[0].clone(), Value::Num(v)),
                Default::Count(v) => (keys[0].clone(), Value::Num(v as f64)),
                Default::Flag(b) => (keys[0].clone(), Value::Flag(b)),
                Default::Text(s) => (keys[0].clone(), Value::Text(s.to_string())),
                Default::InternalList(v) => (keys[keys.len() - 1].clone(), Value::List(v.to_vec())),
            };
            chosen.insert(p.base, default);
        }
        let echo = params
            .iter()
            .filter_map(|p| chosen.get(p.base).map(|kv| (p, kv)))
            .map(|(p, (k, v))| {
                let json = match (p.kind, v) {
                    (Kind::Count, Value::Num(n)) if n.fract() == 0.0 && *n >= 0.0 => Json::from(*n as u64),
                    _ => v.to_json(),
                };
                (k.clone(), json)
            })
            .collect();
        let mut s = Settings {
            units: UnitSystem::default(),
            params: params.to_vec(),
            chosen,
            echo,
        };
        if s.has("length_unit_m") || s.has("mass_unit_kg") {
            let len = s.opt_real("length_unit_m")?.unwrap_or(1e-7);
            let mass = s.opt_real("mass_unit_kg")?.unwrap_or(NUCLEON_MASS_KG);
            s.units = UnitSystem::new(len, mass).map_err(|e| IoError::Config(e.to_string()))?;
        }
        Ok(s)
    }

    /// Effective settings as given (key form preserved), defaults included.
    pub fn echo(&self) -> Json {
        Json::Object(self.echo.clone())
    }

    pub fn has(&self, base: &str) -> bool {
        self.chosen.contains_key(base)
    }

    fn kind(&self, base: &str) -> Kind {
        self.params
            .iter()
            .find(|p| p.base == base)
            .unwrap_or_else(|| panic!("no parameter {base} declared"))
            .kind
    }

    fn get(&self, base: &str) -> Option<&(String, Value)> {
        self.chosen.get(base)
    }

    fn num(&self, base: &str) -> Result<Option<(bool, f64)>> {
        match self.get(base) {
            None => Ok(None),
            Some((key, Value::Num(v))) => {
                if !v.is_finite() {
                    return Err(bad(key, "a finite number"));
                }
                Ok(Some((key.ends_with("_internal"), *v)))
            }
            Some((key, _)) => Err(bad(key, "a number")),
        }
    }

    fn to_internal(&self, kind: Kind, v: f64) -> Result<f64> {
        let u = &self.units;
        Ok(match kind {
            Kind::Length | Kind::LengthList => u.length_to_internal(v),
            Kind::Time => u.time_to_internal(v),
            Kind::Rate => u.rate_to_internal(v).map_err(|e| IoError::Config(e.to_string()))?,
            Kind::Mass => u.mass_to_internal(v),
            Kind::Momentum => v * u.length_unit_m / HBAR_SI,
            Kind::Frequency => v * u.time_unit_s,
            Kind::Real | Kind::Count | Kind::Flag | Kind::Text => v,
        })
    }

    /// A physical quantity in internal units.
    pub fn opt_phys(&self, base: &str) -> Result<Option<f64>> {
        let kind = self.kind(base);
        match self.num(base)? {
            None => Ok(None),
            Some((true, v)) => Ok(Some(v)),
            Some((false, v)) => self.to_internal(kind, v).map(Some),
        }
    }

    pub fn phys(&self, base: &str) -> Result<f64> {
        self.opt_phys(base)?
            .ok_or_else(|| IoError::Config(format!("missing setting {base}")))
    }

    /// A rate in s⁻¹, whichever form it was given in.
    pub fn rate_si(&self, base: &str) -> Result<f64> {
        match self.num(base)? {
            None => Err(IoError::Config(format!("missing setting {base}"))),
            Some((true, v)) => Ok(self.units.rate_to_si(v)),
            Some((false, v)) => Ok(v),
        }
    }

    pub fn phys_list(&self, base: &str) -> Result<Vec<f64>> {
        match self.get(base) {
            Some((key, Value::List(v))) => {
                let internal = key.ends_with("_internal");
                v.iter()
                    .map(|&x| if internal { Ok(x) } else { self.to_internal(Kind::LengthList, x) })
                    .collect()
            }
            Some((key, _)) => Err(bad(key, "a list of numbers")),
            None => Err(IoError::Config(format!("missing setting {base}"))),
        }
    }

    pub fn opt_real(&self, base: &str) -> Result<Option<f64>> {
        Ok(self.num(base)?.map(|(_, v)| v))
    }

    pub fn real(&self, base: &str) -> Result<f64> {
        self.opt_real(base)?
            .ok_or_else(|| IoError::Config(format!("missing setting {base}")))
    }

    pub fn count(&self, base: &str) -> Result<usize> {
        Ok(self.real(base)? as usize)
    }

    pub fn flag(&self, base: &str) -> Result<bool> {
        match self.get(base) {
            Some((_, Value::Flag(b))) => Ok(*b),
            Some((key, _)) => Err(bad(key, "true or false")),
            None => Ok(false),
        }
    }

    pub fn opt_text(&self, base: &str) -> Result<Option<String>> {
        match self.get(base) {
            Some((_, Value::Text(s))) => Ok(Some(s.clone())),
            Some((key, _)) => Err(bad(key, "a string")),
            None => Ok(None),
        }
    }

    pub fn text(&self, base: &str) -> Result<String> {
        self.opt_text(base)?
            .ok_or_else(|| IoError::Config(format!("missing setting {base}")))
    }
}
