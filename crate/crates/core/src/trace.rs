//! Per-step trace records and their CSV form.

use std::io::{self, Write};

use crate::controller::Phase;
use crate::model::Mode;

pub const CSV_HEADER: &str =
    "t,mode,ctrl_phase,theta_o,w_o,w_1,w_2,tau_1,tau_2,tau_o,brake_engaged,contact_active";

/// State at the start of a step and the inputs held over it. SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub mode: Mode,
    pub ctrl_phase: Phase,
    pub theta_o: f64,
    pub w_o: f64,
    pub w_1: f64,
    pub w_2: f64,
    pub tau_1: f64,
    pub tau_2: f64,
    /// Torque the environment applies to the output, including constraint
    /// reactions. Negative pushes the output back.
    pub tau_o: f64,
    pub brake_engaged: bool,
    pub contact_active: bool,
}

/// Formats like C's `%.9g`.
pub fn format_sig9(value: f64) -> String {
    const DIGITS: i32 = 9;
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return format!("{value}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, value);
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    if !(-4..DIGITS).contains(&exponent) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exponent.abs())
    } else {
        let decimals = (DIGITS - 1 - exponent).max(0) as usize;
        trim_fraction(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl TraceRecord {
    pub fn csv_row(&self) -> String {
        let flag = |b: bool| if b { "1" } else { "0" };
        [
            format_sig9(self.t),
            self.mode.token().to_string(),
            self.ctrl_phase.token().to_string(),
            format_sig9(self.theta_o),
            format_sig9(self.w_o),
            format_sig9(self.w_1),
            format_sig9(self.w_2),
            format_sig9(self.tau_1),
            format_sig9(self.tau_2),
            format_sig9(self.tau_o),
            flag(self.brake_engaged).to_string(),
            flag(self.contact_active).to_string(),
        ]
        .join(",")
    }

    /// Parses one data row written by [`TraceRecord::csv_row`].
    pub fn parse_csv_row(line: &str) -> Option<Self> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        let [t, mode, phase, theta_o, w_o, w_1, w_2, tau_1, tau_2, tau_o, brake, contact] =
            fields.as_slice()
        else {
            return None;
        };
        let num = |s: &str| s.parse::<f64>().ok();
        let flag = |s: &str| match s {
            "0" => Some(false),
            "1" => Some(true),
            _ => None,
        };
        Some(Self {
            t: num(t)?,
            mode: mode.parse().ok()?,
            ctrl_phase: Phase::from_token(phase)?,
            theta_o: num(theta_o)?,
            w_o: num(w_o)?,
            w_1: num(w_1)?,
            w_2: num(w_2)?,
            tau_1: num(tau_1)?,
            tau_2: num(tau_2)?,
            tau_o: num(tau_o)?,
            brake_engaged: flag(brake)?,
            contact_active: flag(contact)?,
        })
    }
}

pub fn write_csv<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for record in records {
        writeln!(out, "{}", record.csv_row())?;
    }
    out.flush()
}
