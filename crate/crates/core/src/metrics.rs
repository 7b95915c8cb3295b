//! Summary numbers of a run.

use crate::controller::Phase;
use crate::model::Mode;
use crate::params::ActuatorParams;
use crate::trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// First contact sample to first high-force steady sample, s.
    pub shift_latency: Option<f64>,
    /// Largest drop of `w_o` below an earlier value, rad/s.
    pub w_o_dip: f64,
    /// Largest `|R_k·τ_k|` of the active mode, N·m.
    pub peak_output_torque: f64,
    /// Time spent synchronizing, s.
    pub time_in_sync: f64,
}

pub fn compute_metrics(p: &ActuatorParams, trace: &[TraceRecord]) -> Metrics {
    let first_contact = trace.iter().position(|r| r.contact_active);
    let shift_latency = first_contact.and_then(|start| {
        trace[start..]
            .iter()
            .find(|r| r.ctrl_phase == Phase::SteadyHf)
            .map(|r| r.t - trace[start].t)
    });

    let mut running_max = f64::NEG_INFINITY;
    let mut w_o_dip: f64 = 0.0;
    for r in trace {
        running_max = running_max.max(r.w_o);
        w_o_dip = w_o_dip.max(running_max - r.w_o);
    }

    let peak_output_torque = trace
        .iter()
        .map(|r| match r.mode {
            Mode::HighSpeed => (p.r1 * r.tau_1).abs(),
            Mode::HighForce => (p.r2 * r.tau_2).abs(),
        })
        .fold(0.0, f64::max);

    let step = match trace {
        [first, second, ..] => second.t - first.t,
        _ => 0.0,
    };
    let time_in_sync = trace
        .iter()
        .filter(|r| r.ctrl_phase == Phase::Synchronizing)
        .count() as f64
        * step;

    Metrics {
        shift_latency,
        w_o_dip,
        peak_output_torque,
        time_in_sync,
    }
}
