//! Strict INI-style run configuration.
//!
//! Grammar (documented in the README): `#` or `;` start a comment line,
//! `[section]` opens one of the known sections, `key = value` adds an
//! entry. Unknown sections or keys, duplicate keys, missing units and
//! malformed numbers are all hard errors carrying line and column.
//!
//! Physical parameters carry unit suffixes; each key accepts the canonical
//! unit of its experiment's system plus the companion-system unit, which is
//! converted on the spot.

use std::collections::BTreeMap;
use std::fmt;

use abkit_core::units::{convert, QuantityKind, SystemTag};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "config error at line {}, column {}: {}",
            self.line, self.col, self.message
        )
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, col: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line, col, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Magnetic,
    Electric,
    Visibility,
    Verify,
    Sweep,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Magnetic => "magnetic",
            ExperimentKind::Electric => "electric",
            ExperimentKind::Visibility => "visibility",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub count: usize,
    pub scale: SweepScale,
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    /// Numeric parameters in canonical units (CGS for magnetic/visibility,
    /// MKS for electric).
    pub params: BTreeMap<String, f64>,
    /// Enumerated string parameters (e.g. the electric scenario).
    pub strings: BTreeMap<String, String>,
    pub output_format: Option<OutputFormat>,
    pub output_path: Option<String>,
    /// Relative quadrature tolerance for every computation in the run.
    pub quad_tol: f64,
    pub sweep: Option<SweepSpec>,
}

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

struct Entry {
    value: String,
    line: usize,
    col: usize,
    used: std::cell::Cell<bool>,
}

struct Section {
    entries: BTreeMap<String, Entry>,
    line: usize,
}

const KNOWN_SECTIONS: [&str; 5] = ["experiment", "parameters", "output", "tolerances", "sweep"];

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let col = raw.find(|c: char| !c.is_whitespace()).unwrap_or(0) + 1;
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, col, "unterminated section header"))?
                .trim();
            if !KNOWN_SECTIONS.contains(&name) {
                return Err(err(line_no, col, format!("unknown section [{name}]")));
            }
            if sections.contains_key(name) {
                return Err(err(line_no, col, format!("duplicate section [{name}]")));
            }
            sections.insert(name.to_string(), Section { entries: BTreeMap::new(), line: line_no });
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(line_no, col, "expected `key = value` or `[section]`"));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(err(line_no, col, "empty key"));
        }
        let section_name = current
            .clone()
            .ok_or_else(|| err(line_no, col, "entry before any [section] header"))?;
        let section = sections.get_mut(&section_name).unwrap();
        if section.entries.contains_key(key) {
            return Err(err(line_no, col, format!("duplicate key `{key}`")));
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: line_no,
                col,
                used: std::cell::Cell::new(false),
            },
        );
    }
    Ok(sections)
}

/// Unit expectations of one numeric parameter: the canonical suffix plus an
/// optional companion-system suffix converted via the units module.
struct UnitRule {
    canonical: &'static str,
    alternate: Option<(&'static str, QuantityKind, SystemTag, SystemTag)>,
}

fn unit_rule(kind: QuantityKind, canonical_system: SystemTag) -> UnitRule {
    use QuantityKind::*;
    use SystemTag::*;
    let (cgs, mks) = match kind {
        Length => ("cm", "m"),
        Speed => ("cm/s", "m/s"),
        Mass => ("g", "kg"),
        Charge => ("statC", "C"),
        Time => ("s", "s"),
        _ => ("1", "1"),
    };
    match canonical_system {
        CgsGaussian => UnitRule {
            canonical: cgs,
            alternate: if cgs == mks { None } else { Some((mks, kind, RationalizedMks, CgsGaussian)) },
        },
        RationalizedMks => UnitRule {
            canonical: mks,
            alternate: if cgs == mks { None } else { Some((cgs, kind, CgsGaussian, RationalizedMks)) },
        },
    }
}

/// (key, rule) table per experiment; `None` rule means a bare-number key.
fn parameter_rules(kind: ExperimentKind) -> Vec<(&'static str, Option<UnitRule>, bool)> {
    use ExperimentKind::*;
    use QuantityKind::*;
    use SystemTag::*;
    let plain = |unit: &'static str| Some(UnitRule { canonical: unit, alternate: None });
    match kind {
        Magnetic | Visibility | Sweep => vec![
            ("a", Some(unit_rule(Length, CgsGaussian)), true),
            ("R", Some(unit_rule(Length, CgsGaussian)), true),
            ("L", Some(unit_rule(Length, CgsGaussian)), true),
            ("v0", Some(unit_rule(Speed, CgsGaussian)), true),
            ("u", Some(unit_rule(Speed, CgsGaussian)), true),
            ("target_phase", plain("rad"), true),
        ],
        Electric => vec![
            ("sigma", plain("C/m^2"), true),
            ("area", plain("m^2"), true),
            ("D", Some(unit_rule(Length, RationalizedMks)), true),
            ("M", Some(unit_rule(Mass, RationalizedMks)), true),
            ("e", Some(unit_rule(Charge, RationalizedMks)), true),
            ("u", Some(unit_rule(Speed, RationalizedMks)), true),
            ("T", Some(unit_rule(Time, RationalizedMks)), true),
            ("v0", Some(unit_rule(Speed, RationalizedMks)), false),
            ("fraction", plain("1"), false),
        ],
        Verify => vec![],
    }
}

fn parse_quantity(entry: &Entry, key: &str, rule: &UnitRule) -> Result<f64, ConfigError> {
    let value = entry.value.trim();
    let Some(split) = value.find(|c: char| c.is_whitespace()) else {
        // dimensionless keys may omit the `1` suffix
        if rule.canonical == "1" && rule.alternate.is_none() {
            return parse_bare_number(entry, key);
        }
        return Err(err(
            entry.line,
            entry.col,
            format!("`{key}` needs a unit suffix (expected `{}`)", rule.canonical),
        ));
    };
    let (num, unit) = value.split_at(split);
    let unit = unit.trim();
    let num: f64 = num.parse().map_err(|_| {
        err(entry.line, entry.col, format!("`{key}`: `{num}` is not a number"))
    })?;
    if unit == rule.canonical {
        return Ok(num);
    }
    if let Some((alt, kind, from, to)) = rule.alternate {
        if unit == alt {
            return Ok(convert(num, kind, from, to));
        }
        return Err(err(
            entry.line,
            entry.col,
            format!("`{key}`: unit `{unit}` not accepted (use `{}` or `{alt}`)", rule.canonical),
        ));
    }
    Err(err(
        entry.line,
        entry.col,
        format!("`{key}`: unit `{unit}` not accepted (use `{}`)", rule.canonical),
    ))
}

fn parse_bare_number(entry: &Entry, key: &str) -> Result<f64, ConfigError> {
    entry
        .value
        .trim()
        .parse()
        .map_err(|_| err(entry.line, entry.col, format!("`{key}`: expected a number")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let sections = parse_sections(text)?;

        let experiment = sections
            .get("experiment")
            .ok_or_else(|| err(1, 1, "missing [experiment] section"))?;
        let kind_entry = experiment
            .entries
            .get("kind")
            .ok_or_else(|| err(experiment.line, 1, "missing `kind` in [experiment]"))?;
        kind_entry.used.set(true);
        let kind = match kind_entry.value.as_str() {
            "magnetic" => ExperimentKind::Magnetic,
            "electric" => ExperimentKind::Electric,
            "visibility" => ExperimentKind::Visibility,
            "verify" => ExperimentKind::Verify,
            "sweep" => ExperimentKind::Sweep,
            other => {
                return Err(err(
                    kind_entry.line,
                    kind_entry.col,
                    format!("unknown experiment kind `{other}`"),
                ))
            }
        };

        let mut params = BTreeMap::new();
        let mut strings = BTreeMap::new();
        let rules = parameter_rules(kind);
        if let Some(parameters) = sections.get("parameters") {
            for (key, entry) in &parameters.entries {
                if kind == ExperimentKind::Electric && key == "scenario" {
                    entry.used.set(true);
                    match entry.value.as_str() {
                        "fixed" | "free" => {
                            strings.insert(key.clone(), entry.value.clone());
                        }
                        other => {
                            return Err(err(
                                entry.line,
                                entry.col,
                                format!("scenario must be `fixed` or `free`, got `{other}`"),
                            ))
                        }
                    }
                    continue;
                }
                let Some((_, rule, _)) = rules.iter().find(|(k, _, _)| k == key) else {
                    return Err(err(
                        entry.line,
                        entry.col,
                        format!("unknown parameter `{key}` for experiment `{}`", kind.name()),
                    ));
                };
                entry.used.set(true);
                let value = match rule {
                    Some(rule) => parse_quantity(entry, key, rule)?,
                    None => parse_bare_number(entry, key)?,
                };
                params.insert(key.clone(), value);
            }
        }
        // required parameters present?
        for (key, _, required) in &rules {
            if *required && !params.contains_key(*key) {
                let line = sections.get("parameters").map(|s| s.line).unwrap_or(1);
                return Err(err(line, 1, format!("missing required parameter `{key}`")));
            }
        }
        if kind == ExperimentKind::Electric {
            let scenario = strings.get("scenario").cloned().unwrap_or_else(|| "fixed".into());
            if scenario == "free" && !params.contains_key("v0") {
                let line = sections.get("parameters").map(|s| s.line).unwrap_or(1);
                return Err(err(line, 1, "free scenario needs `v0`"));
            }
            strings.insert("scenario".into(), scenario);
        }

        let mut output_format = None;
        let mut output_path = None;
        if let Some(output) = sections.get("output") {
            for (key, entry) in &output.entries {
                entry.used.set(true);
                match key.as_str() {
                    "format" => {
                        output_format = Some(match entry.value.as_str() {
                            "csv" => OutputFormat::Csv,
                            "json" => OutputFormat::Json,
                            other => {
                                return Err(err(
                                    entry.line,
                                    entry.col,
                                    format!("format must be csv or json, got `{other}`"),
                                ))
                            }
                        })
                    }
                    "path" => output_path = Some(entry.value.clone()),
                    other => {
                        return Err(err(entry.line, entry.col, format!("unknown output key `{other}`")))
                    }
                }
            }
        }

        let mut quad_tol = DEFAULT_QUAD_TOL;
        if let Some(tolerances) = sections.get("tolerances") {
            for (key, entry) in &tolerances.entries {
                entry.used.set(true);
                match key.as_str() {
                    "quad" => {
                        quad_tol = parse_bare_number(entry, "quad")?;
                        if !(quad_tol > 0.0) {
                            return Err(err(entry.line, entry.col, "quad tolerance must be positive"));
                        }
                    }
                    other => {
                        return Err(err(
                            entry.line,
                            entry.col,
                            format!("unknown tolerance key `{other}`"),
                        ))
                    }
                }
            }
        }

        let mut sweep = None;
        if kind == ExperimentKind::Sweep {
            let section = sections
                .get("sweep")
                .ok_or_else(|| err(1, 1, "sweep experiment needs a [sweep] section"))?;
            let get = |key: &str| -> Result<&Entry, ConfigError> {
                section
                    .entries
                    .get(key)
                    .inspect(|e| e.used.set(true))
                    .ok_or_else(|| err(section.line, 1, format!("missing sweep key `{key}`")))
            };
            let parameter_entry = get("parameter")?;
            let parameter = parameter_entry.value.clone();
            let Some((_, Some(rule), _)) = parameter_rules(ExperimentKind::Magnetic)
                .into_iter()
                .find(|(k, _, _)| *k == parameter)
            else {
                return Err(err(
                    parameter_entry.line,
                    parameter_entry.col,
                    format!("`{parameter}` is not a sweepable magnetic parameter"),
                ));
            };
            let from = parse_quantity(get("from")?, "from", &rule)?;
            let to = parse_quantity(get("to")?, "to", &rule)?;
            let count_entry = get("count")?;
            let count: usize = count_entry.value.parse().map_err(|_| {
                err(count_entry.line, count_entry.col, "count must be a non-negative integer")
            })?;
            let scale_entry = get("scale")?;
            let scale = match scale_entry.value.as_str() {
                "linear" => SweepScale::Linear,
                "log" => SweepScale::Log,
                other => {
                    return Err(err(
                        scale_entry.line,
                        scale_entry.col,
                        format!("scale must be linear or log, got `{other}`"),
                    ))
                }
            };
            if count < 2 {
                return Err(err(count_entry.line, count_entry.col, "sweep needs at least 2 points"));
            }
            if !(to > from) || !(from > 0.0) {
                return Err(err(
                    section.line,
                    1,
                    "sweep range must be positive with to > from",
                ));
            }
            sweep = Some(SweepSpec { parameter, from, to, count, scale });
        } else if sections.contains_key("sweep") {
            let s = &sections["sweep"];
            return Err(err(s.line, 1, "[sweep] section only valid for kind = sweep"));
        }

        // every entry must have been consumed
        for section in sections.values() {
            for (key, entry) in &section.entries {
                if !entry.used.get() {
                    return Err(err(entry.line, entry.col, format!("unknown key `{key}`")));
                }
            }
        }

        Ok(RunConfig {
            kind,
            params,
            strings,
            output_format,
            output_path,
            quad_tol,
            sweep,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGNETIC: &str = "\
[experiment]
kind = magnetic

[parameters]
a = 1.0 cm
R = 10.0 cm
L = 100.0 cm
v0 = 1.0 cm/s
u = 100.0 cm/s
target_phase = 3.14159 rad
";

    #[test]
    fn parses_a_magnetic_config() {
        let cfg = RunConfig::parse(MAGNETIC).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Magnetic);
        assert_eq!(cfg.params["a"], 1.0);
        assert_eq!(cfg.quad_tol, DEFAULT_QUAD_TOL);
    }

    #[test]
    fn alternate_units_are_converted() {
        let text = MAGNETIC.replace("L = 100.0 cm", "L = 1.0 m");
        let cfg = RunConfig::parse(&text).unwrap();
        assert!((cfg.params["L"] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_is_rejected_with_position() {
        let text = format!("{MAGNETIC}mystery = 7 cm\n");
        let e = RunConfig::parse(&text).unwrap_err();
        assert_eq!(e.line, 11);
        assert!(e.message.contains("mystery"));
    }

    #[test]
    fn missing_unit_is_rejected() {
        let text = MAGNETIC.replace("a = 1.0 cm", "a = 1.0");
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.message.contains("unit suffix"));
    }

    #[test]
    fn wrong_unit_is_rejected() {
        let text = MAGNETIC.replace("a = 1.0 cm", "a = 1.0 kg");
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.message.contains("not accepted"));
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let text = format!("{MAGNETIC}a = 2.0 cm\n");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn sweep_needs_a_nonempty_range() {
        let text = "\
[experiment]
kind = sweep

[parameters]
a = 1.0 cm
R = 10.0 cm
L = 100.0 cm
v0 = 1.0 cm/s
u = 100.0 cm/s
target_phase = 3.14159 rad

[sweep]
parameter = L
from = 100 cm
to = 10000 cm
count = 0
scale = log
";
        let e = RunConfig::parse(text).unwrap_err();
        assert!(e.message.contains("at least 2"));
    }

    #[test]
    fn electric_free_requires_launch_speed() {
        let text = "\
[experiment]
kind = electric

[parameters]
scenario = free
sigma = 0.5 C/m^2
area = 100.0 m^2
D = 2.0 m
M = 1e8 kg
e = 0.05 C
u = 10.0 m/s
T = 3.0 s
";
        let e = RunConfig::parse(text).unwrap_err();
        assert!(e.message.contains("v0"));
    }
}
