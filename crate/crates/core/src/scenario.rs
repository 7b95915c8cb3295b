//! INI-style scenario and parameter files.
//!
//! ```text
//! name = stiff heavy
//!
//! [actuator]
//! R1 = 23
//!
//! [load]
//! type = inertial
//! contact_angle = 0.3
//!
//! [controller]
//! k_d_schedule = 0:HS,auto:HF
//!
//! [sim]
//! dt = 1e-4
//! ```
//!
//! Blank lines and lines starting with `#` or `;` are ignored. Omitted keys
//! take their defaults. Keys outside a section other than `name` are
//! reported as warnings, as are keys a section does not use.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::controller::{ControllerConfig, ScheduleEntry, Trigger};
use crate::environment::{LoadKind, LoadModel};
use crate::error::{ParseError, ValidationError};
use crate::model::Mode;
use crate::params::ActuatorParams;
use crate::simulator::SimConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub actuator: ActuatorParams,
    pub load: LoadModel,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            name: String::new(),
            actuator: ActuatorParams::prototype(),
            load: LoadModel::Free,
            controller: ControllerConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

/// Something in the file that was accepted but ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
struct Section {
    entries: Vec<Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

const SECTIONS: [&str; 4] = ["actuator", "load", "controller", "sim"];

struct Document {
    top: Section,
    sections: HashMap<&'static str, Section>,
}

fn tokenize(text: &str) -> Result<Document, ParseError> {
    let mut top = Section::default();
    let mut sections: HashMap<&'static str, Section> = HashMap::new();
    let mut current: Option<&'static str> = None;
    let mut seen: HashMap<(Option<&'static str>, String), usize> = HashMap::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let indent = raw.len() - raw.trim_start().len();
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') || body.starts_with(';') {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let Some(close) = rest.find(']') else {
                return Err(ParseError::Syntax {
                    line,
                    column: indent + body.len() + 1,
                    message: "expected `]` to close the section header".into(),
                });
            };
            let trailing = rest[close + 1..].trim();
            if !trailing.is_empty() {
                let column = raw.find(trailing).map_or(indent + 1, |c| c + 1);
                return Err(ParseError::Syntax {
                    line,
                    column,
                    message: "unexpected text after section header".into(),
                });
            }
            let name = rest[..close].trim();
            let Some(&known) = SECTIONS.iter().find(|s| **s == name) else {
                return Err(ParseError::UnknownSection {
                    line,
                    section: name.to_string(),
                });
            };
            sections.entry(known).or_default();
            current = Some(known);
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(ParseError::Syntax {
                line,
                column: indent + 1,
                message: "expected `key = value`".into(),
            });
        };
        let key = body[..eq].trim();
        if key.is_empty() {
            return Err(ParseError::Syntax {
                line,
                column: indent + 1,
                message: "missing key before `=`".into(),
            });
        }
        if let Some(bad) = key.find(|c: char| c.is_whitespace()) {
            return Err(ParseError::Syntax {
                line,
                column: indent + bad + 1,
                message: "keys cannot contain whitespace".into(),
            });
        }
        let value = body[eq + 1..].trim();
        if let Some(&first_line) = seen.get(&(current, key.to_string())) {
            return Err(ParseError::DuplicateKey {
                line,
                key: key.to_string(),
                first_line,
            });
        }
        seen.insert((current, key.to_string()), line);
        let entry = Entry {
            key: key.to_string(),
            value: value.to_string(),
            line,
        };
        match current {
            Some(name) => sections.entry(name).or_default().entries.push(entry),
            None => top.entries.push(entry),
        }
    }
    Ok(Document { top, sections })
}

/// Reads typed values out of one section and remembers which keys were used.
struct Reader<'a> {
    name: &'static str,
    section: Option<&'a Section>,
    used: Vec<&'static str>,
}

impl<'a> Reader<'a> {
    fn new(doc: &'a Document, name: &'static str) -> Self {
        Self {
            name,
            section: doc.sections.get(name),
            used: Vec::new(),
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Entry> {
        self.used.push(key);
        self.section.and_then(|s| s.get(key))
    }

    fn bad(&self, entry: &Entry, message: impl Into<String>) -> ParseError {
        ParseError::BadValue {
            section: self.name.to_string(),
            key: entry.key.clone(),
            line: entry.line,
            message: message.into(),
        }
    }

    fn number(&mut self, key: &'static str) -> Result<Option<f64>, ParseError> {
        let Some(entry) = self.raw(key) else {
            return Ok(None);
        };
        match entry.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            Ok(_) => Err(self.bad(entry, "value must be finite")),
            Err(_) => Err(self.bad(entry, format!("`{}` is not a number", entry.value))),
        }
    }

    fn number_or(&mut self, key: &'static str, default: f64) -> Result<f64, ParseError> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    fn unused(&self, warnings: &mut Vec<Warning>) {
        let Some(section) = self.section else { return };
        for entry in &section.entries {
            if !self.used.contains(&entry.key.as_str()) {
                warnings.push(Warning {
                    line: entry.line,
                    message: format!("unknown key `{}` in [{}] ignored", entry.key, self.name),
                });
            }
        }
    }
}

fn read_actuator(doc: &Document, warnings: &mut Vec<Warning>) -> Result<ActuatorParams, ParseError> {
    let d = ActuatorParams::prototype();
    let mut r = Reader::new(doc, "actuator");
    let p = ActuatorParams {
        r1: r.number_or("R1", d.r1)?,
        r2: r.number_or("R2", d.r2)?,
        i_o: r.number_or("I_o", d.i_o)?,
        i_1: r.number_or("I_1", d.i_1)?,
        i_2: r.number_or("I_2", d.i_2)?,
        b_o: r.number_or("b_o", d.b_o)?,
        b_1: r.number_or("b_1", d.b_1)?,
        b_2: r.number_or("b_2", d.b_2)?,
        tau1_max: r.number_or("tau1_max", d.tau1_max)?,
        tau2_max: r.number_or("tau2_max", d.tau2_max)?,
        w_o_max_hs: r.number_or("w_o_max_hs", d.w_o_max_hs)?,
        w_o_max_hf: r.number_or("w_o_max_hf", d.w_o_max_hf)?,
        brake_delay: r.number_or("brake_delay", d.brake_delay)?,
    };
    r.unused(warnings);
    p.validate()?;
    Ok(p)
}

fn read_load(doc: &Document, warnings: &mut Vec<Warning>) -> Result<LoadModel, ParseError> {
    let mut r = Reader::new(doc, "load");
    let Some(kind_entry) = r.raw("type") else {
        return Err(ParseError::MissingKey {
            section: "load".into(),
            key: "type".into(),
        });
    };
    let kind = match kind_entry.value.as_str() {
        "free" => LoadKind::Free,
        "fixed" => LoadKind::Fixed,
        "inertial" => LoadKind::Inertial,
        "compliant" => LoadKind::Compliant,
        other => {
            return Err(r.bad(
                kind_entry,
                format!("unknown load type `{other}` (expected free, fixed, inertial or compliant)"),
            ))
        }
    };
    let angle = LoadModel::DEFAULT_CONTACT_ANGLE;
    let load = match kind {
        LoadKind::Free => LoadModel::Free,
        LoadKind::Fixed => LoadModel::FixedObstacle {
            contact_angle: r.number_or("contact_angle", angle)?,
        },
        LoadKind::Inertial => LoadModel::InertialLoad {
            inertia: r.number_or("I_L", LoadModel::DEFAULT_INERTIA)?,
            resistive_torque: r.number_or("resistive_torque", LoadModel::DEFAULT_RESISTIVE_TORQUE)?,
            contact_angle: r.number_or("contact_angle", angle)?,
        },
        LoadKind::Compliant => LoadModel::CompliantLoad {
            stiffness: r.number_or("k_c", LoadModel::DEFAULT_STIFFNESS)?,
            damping: r.number_or("b_c", LoadModel::DEFAULT_DAMPING)?,
            contact_angle: r.number_or("contact_angle", angle)?,
        },
    };
    r.unused(warnings);
    load.validate()?;
    Ok(load)
}

/// Parses a `k_d_schedule` value such as `0:HS,auto:HF`.
pub fn parse_schedule(text: &str) -> Result<Vec<ScheduleEntry>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (when, mode) = item
                .split_once(':')
                .ok_or_else(|| format!("`{item}` is not a time:mode pair"))?;
            let mode: Mode = mode
                .trim()
                .parse()
                .map_err(|_| format!("unknown mode `{}` (expected HS or HF)", mode.trim()))?;
            let trigger = match when.trim() {
                "auto" => Trigger::Auto,
                t => Trigger::At(
                    t.parse::<f64>()
                        .ok()
                        .filter(|t| t.is_finite())
                        .ok_or_else(|| format!("`{t}` is not a time or `auto`"))?,
                ),
            };
            Ok(ScheduleEntry { trigger, mode })
        })
        .collect()
}

fn format_schedule(schedule: &[ScheduleEntry]) -> String {
    schedule
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn read_controller(doc: &Document, warnings: &mut Vec<Warning>) -> Result<ControllerConfig, ParseError> {
    let d = ControllerConfig::default();
    let mut r = Reader::new(doc, "controller");
    let schedule = match r.raw("k_d_schedule") {
        Some(entry) => {
            let schedule = parse_schedule(&entry.value).map_err(|m| r.bad(entry, m))?;
            if schedule.is_empty() {
                return Err(r.bad(entry, "schedule is empty"));
            }
            schedule
        }
        None => d.schedule.clone(),
    };
    let c = ControllerConfig {
        tau_d: r.number_or("tau_d", d.tau_d)?,
        schedule,
        c_prep: r.number_or("C_prep", d.c_prep)?,
        c_sync: r.number_or("C_sync", d.c_sync)?,
        w1_epsilon: r.number_or("w1_epsilon", d.w1_epsilon)?,
        decel_threshold: r.number_or("decel_threshold", d.decel_threshold)?,
        brake_delay: r.number("brake_delay")?,
        p_o_hat: r.number_or("p_o_hat", d.p_o_hat)?,
    };
    r.unused(warnings);
    c.validate()?;
    Ok(c)
}

fn read_sim(doc: &Document, warnings: &mut Vec<Warning>) -> Result<SimConfig, ParseError> {
    let d = SimConfig::default();
    let mut r = Reader::new(doc, "sim");
    let control_divisor = match r.raw("control_divisor") {
        Some(entry) => entry
            .value
            .parse::<u32>()
            .map_err(|_| r.bad(entry, "must be a positive integer"))?,
        None => d.control_divisor,
    };
    let s = SimConfig {
        dt: r.number_or("dt", d.dt)?,
        duration: r.number_or("duration", d.duration)?,
        event_tol: r.number_or("event_tol", d.event_tol)?,
        encoder_quantization: r.number_or("encoder_quantization", d.encoder_quantization)?,
        control_divisor,
    };
    r.unused(warnings);
    s.validate()?;
    if s.duration <= 0.0 {
        return Err(ValidationError::new(&["duration"], "must be strictly positive").into());
    }
    Ok(s)
}

/// Parses a scenario and returns it with any warnings.
pub fn parse_scenario_with_warnings(text: &str) -> Result<(ScenarioSpec, Vec<Warning>), ParseError> {
    let doc = tokenize(text)?;
    let mut warnings = Vec::new();
    let mut name = String::new();
    for entry in &doc.top.entries {
        if entry.key == "name" {
            name = entry.value.clone();
        } else {
            warnings.push(Warning {
                line: entry.line,
                message: format!("unknown top-level key `{}` ignored", entry.key),
            });
        }
    }
    let spec = ScenarioSpec {
        name,
        actuator: read_actuator(&doc, &mut warnings)?,
        load: read_load(&doc, &mut warnings)?,
        controller: read_controller(&doc, &mut warnings)?,
        sim: read_sim(&doc, &mut warnings)?,
    };
    Ok((spec, warnings))
}

pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ParseError> {
    parse_scenario_with_warnings(text).map(|(spec, _)| spec)
}

/// Parses a parameter file holding only an `[actuator]` section.
pub fn parse_params(text: &str) -> Result<ActuatorParams, ParseError> {
    let doc = tokenize(text)?;
    if let Some(section) = SECTIONS[1..].iter().find(|s| doc.sections.contains_key(*s)) {
        return Err(ParseError::UnknownSection {
            line: 0,
            section: section.to_string(),
        });
    }
    read_actuator(&doc, &mut Vec::new())
}

/// `[actuator]` section text. Floats use the shortest exact representation.
pub fn actuator_ini(p: &ActuatorParams) -> String {
    let mut out = String::from("[actuator]\n");
    let fields = [
        ("R1", p.r1),
        ("R2", p.r2),
        ("I_o", p.i_o),
        ("I_1", p.i_1),
        ("I_2", p.i_2),
        ("b_o", p.b_o),
        ("b_1", p.b_1),
        ("b_2", p.b_2),
        ("tau1_max", p.tau1_max),
        ("tau2_max", p.tau2_max),
        ("w_o_max_hs", p.w_o_max_hs),
        ("w_o_max_hf", p.w_o_max_hf),
        ("brake_delay", p.brake_delay),
    ];
    for (key, value) in fields {
        let _ = writeln!(out, "{key} = {value:?}");
    }
    out
}

impl ScenarioSpec {
    /// Serializes to text that [`parse_scenario`] reads back unchanged.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        if !self.name.is_empty() {
            let _ = writeln!(out, "name = {}\n", self.name);
        }
        out.push_str(&actuator_ini(&self.actuator));

        let _ = writeln!(out, "\n[load]\ntype = {}", self.load.kind().token());
        match self.load {
            LoadModel::Free => {}
            LoadModel::FixedObstacle { contact_angle } => {
                let _ = writeln!(out, "contact_angle = {contact_angle:?}");
            }
            LoadModel::InertialLoad {
                inertia,
                resistive_torque,
                contact_angle,
            } => {
                let _ = writeln!(out, "contact_angle = {contact_angle:?}");
                let _ = writeln!(out, "I_L = {inertia:?}");
                let _ = writeln!(out, "resistive_torque = {resistive_torque:?}");
            }
            LoadModel::CompliantLoad {
                stiffness,
                damping,
                contact_angle,
            } => {
                let _ = writeln!(out, "contact_angle = {contact_angle:?}");
                let _ = writeln!(out, "k_c = {stiffness:?}");
                let _ = writeln!(out, "b_c = {damping:?}");
            }
        }

        let c = &self.controller;
        let _ = writeln!(out, "\n[controller]");
        let _ = writeln!(out, "tau_d = {:?}", c.tau_d);
        let _ = writeln!(out, "k_d_schedule = {}", format_schedule(&c.schedule));
        let _ = writeln!(out, "C_prep = {:?}", c.c_prep);
        let _ = writeln!(out, "C_sync = {:?}", c.c_sync);
        let _ = writeln!(out, "w1_epsilon = {:?}", c.w1_epsilon);
        let _ = writeln!(out, "decel_threshold = {:?}", c.decel_threshold);
        if let Some(delay) = c.brake_delay {
            let _ = writeln!(out, "brake_delay = {delay:?}");
        }
        let _ = writeln!(out, "p_o_hat = {:?}", c.p_o_hat);

        let s = &self.sim;
        let _ = writeln!(out, "\n[sim]");
        let _ = writeln!(out, "dt = {:?}", s.dt);
        let _ = writeln!(out, "duration = {:?}", s.duration);
        let _ = writeln!(out, "event_tol = {:?}", s.event_tol);
        let _ = writeln!(out, "encoder_quantization = {:?}", s.encoder_quantization);
        let _ = writeln!(out, "control_divisor = {}", s.control_divisor);
        out
    }
}
