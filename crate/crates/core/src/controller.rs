//! Actuator-level controller.
//!
//! The caller supplies a desired motor torque `tau_d` and a desired mode
//! `k_d`. The controller routes `tau_d` to the motor of the active mode and
//! runs a speed loop on M1 projected on the output nullspace: a low-gain
//! preparation loop throughout high-speed operation, and a high-gain
//! synchronization loop once a down-shift is requested. The brake is only
//! commanded closed once `|w_1|` is under the engagement threshold.

use std::fmt;

use crate::error::{ControllerError, ValidationError};
use crate::model::{nullspace_projection, Mode};
use crate::params::ActuatorParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerCommand {
    /// Desired motor torque, N·m, routed to the motor of the active mode.
    pub tau_d: f64,
    pub k_d: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    SteadyHs,
    SteadyHf,
    /// High-gain loop driving `w_1` to zero, brake still open.
    Synchronizing,
    /// Brake commanded closed, waiting out the engagement delay.
    EngagingBrake,
    /// A down-shift was aborted mid-engagement; brake commanded open.
    ReleasingBrake,
}

impl Phase {
    pub fn token(self) -> &'static str {
        match self {
            Phase::SteadyHs => "STEADY_HS",
            Phase::SteadyHf => "STEADY_HF",
            Phase::Synchronizing => "SYNCHRONIZING",
            Phase::EngagingBrake => "ENGAGING_BRAKE",
            Phase::ReleasingBrake => "RELEASING_BRAKE",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        [
            Phase::SteadyHs,
            Phase::SteadyHf,
            Phase::Synchronizing,
            Phase::EngagingBrake,
            Phase::ReleasingBrake,
        ]
        .into_iter()
        .find(|p| p.token() == token)
    }

    /// Phase to start in for a given actuator mode.
    pub fn steady(mode: Mode) -> Self {
        match mode {
            Mode::HighSpeed => Phase::SteadyHs,
            Mode::HighForce => Phase::SteadyHf,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrakeCommand {
    Open,
    Closed,
}

/// Tunable part of the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Preparation loop gain, 1/s.
    pub c_prep: f64,
    /// Synchronization loop gain, 1/s.
    pub c_sync: f64,
    /// `|w_1|` below which the brake may be closed, rad/s.
    pub w1_epsilon: f64,
    /// Time the controller waits after commanding the brake closed, s.
    pub brake_delay: f64,
    /// Expected output impulse of the next impact, N·m·s. Zero when none is
    /// expected.
    pub p_o_hat: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            c_prep: 0.5,
            c_sync: 2000.0,
            w1_epsilon: 0.5,
            brake_delay: 0.010,
            p_o_hat: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub phase: Phase,
    pub gains: ControllerGains,
    /// Time spent in `EngagingBrake`, s.
    pub brake_timer: f64,
    /// M1 velocity setpoint of the last step, rad/s.
    pub w1_d: f64,
}

impl ControllerState {
    pub fn new(gains: ControllerGains, mode: Mode) -> Self {
        Self {
            phase: Phase::steady(mode),
            gains,
            brake_timer: 0.0,
            w1_d: 0.0,
        }
    }

    pub fn brake(&self) -> BrakeCommand {
        match self.phase {
            Phase::SteadyHf | Phase::EngagingBrake => BrakeCommand::Closed,
            Phase::SteadyHs | Phase::Synchronizing | Phase::ReleasingBrake => BrakeCommand::Open,
        }
    }
}

/// Controller-visible velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub w_o: f64,
    pub w_1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    pub tau_1: f64,
    pub tau_2: f64,
    pub brake: BrakeCommand,
    pub state: ControllerState,
}

/// Sends `tau_d` to M1 in high-speed mode and to M2 in high-force mode.
pub fn torque_routing(cmd: &ControllerCommand, mode: Mode) -> (f64, f64) {
    match mode {
        Mode::HighSpeed => (cmd.tau_d, 0.0),
        Mode::HighForce => (0.0, cmd.tau_d),
    }
}

/// Main loop on M1 plus a proportional M1 speed loop along the nullspace.
pub fn nullspace_speed_loop(
    p: &ActuatorParams,
    tau_d: f64,
    w_1: f64,
    w1_d: f64,
    gain: f64,
) -> (f64, f64) {
    let (n1, n2) = nullspace_projection(p, gain * (w1_d - w_1));
    (n1 + tau_d, n2)
}

/// M1 velocity that the simplified impact map sends to zero for an impulse
/// `p_o_hat`.
pub fn predicted_w1_setpoint(p: &ActuatorParams, p_o_hat: f64) -> f64 {
    -p.r1 * p_o_hat / (p.i_o + p.i_1 * p.r1 * p.r1)
}

/// Fires when the last two output velocity samples show a deceleration above
/// `decel_threshold` while the output was moving toward the load.
pub fn detect_contact(samples: &[f64], dt: f64, decel_threshold: f64) -> bool {
    let [.., previous, latest] = samples else {
        return false;
    };
    *previous > 0.0 && (previous - latest) / dt > decel_threshold
}

/// Component-wise clamp to the motor torque limits.
pub fn saturate(p: &ActuatorParams, tau_1: f64, tau_2: f64) -> (f64, f64) {
    (
        tau_1.clamp(-p.tau1_max, p.tau1_max),
        tau_2.clamp(-p.tau2_max, p.tau2_max),
    )
}

/// Drops the commanded torque when it would push the output past the speed
/// limit of `mode`.
pub fn limit_drive(p: &ActuatorParams, mode: Mode, tau_d: f64, w_o: f64) -> f64 {
    let limit = match mode {
        Mode::HighSpeed => p.w_o_max_hs,
        Mode::HighForce => p.w_o_max_hf,
    };
    if (w_o >= limit && tau_d > 0.0) || (w_o <= -limit && tau_d < 0.0) {
        0.0
    } else {
        tau_d
    }
}

/// One controller period. Pure: the new state is returned, not stored.
pub fn controller_step(
    p: &ActuatorParams,
    ctrl: &ControllerState,
    cmd: &ControllerCommand,
    measured: Measurement,
    mode: Mode,
    dt: f64,
) -> Result<ControllerOutput, ControllerError> {
    if !measured.w_o.is_finite() || !measured.w_1.is_finite() || !cmd.tau_d.is_finite() {
        return Err(ControllerError::NonFiniteMeasurement);
    }
    let consistent = !matches!(
        (ctrl.phase, mode),
        (Phase::SteadyHs | Phase::Synchronizing, Mode::HighForce) | (Phase::SteadyHf, Mode::HighSpeed)
    );
    if !consistent {
        return Err(ControllerError::InternalFault {
            phase: ctrl.phase.token(),
            mode,
        });
    }

    let gains = ctrl.gains;
    let mut next = *ctrl;
    let preparing = |next: &mut ControllerState| {
        next.phase = Phase::SteadyHs;
        next.brake_timer = 0.0;
        next.w1_d = predicted_w1_setpoint(p, gains.p_o_hat);
        let tau_d = limit_drive(p, Mode::HighSpeed, cmd.tau_d, measured.w_o);
        nullspace_speed_loop(p, tau_d, measured.w_1, next.w1_d, gains.c_prep)
    };
    let synchronizing = |next: &mut ControllerState| {
        next.w1_d = 0.0;
        let tau_d = limit_drive(p, Mode::HighSpeed, cmd.tau_d, measured.w_o);
        nullspace_speed_loop(p, tau_d, measured.w_1, 0.0, gains.c_sync)
    };
    let forcing = |next: &mut ControllerState| {
        next.w1_d = 0.0;
        let tau_d = limit_drive(p, Mode::HighForce, cmd.tau_d, measured.w_o);
        torque_routing(
            &ControllerCommand {
                tau_d,
                k_d: Mode::HighForce,
            },
            Mode::HighForce,
        )
    };

    let (tau_1, tau_2) = match (ctrl.phase, cmd.k_d) {
        (Phase::SteadyHs, Mode::HighSpeed) | (Phase::Synchronizing, Mode::HighSpeed) => {
            preparing(&mut next)
        }
        (Phase::SteadyHf, Mode::HighSpeed) => preparing(&mut next),
        (Phase::SteadyHf, Mode::HighForce) => forcing(&mut next),
        (Phase::SteadyHs, Mode::HighForce) | (Phase::Synchronizing, Mode::HighForce) => {
            let torques = synchronizing(&mut next);
            if measured.w_1.abs() < gains.w1_epsilon {
                next.phase = Phase::EngagingBrake;
                next.brake_timer = 0.0;
            } else {
                next.phase = Phase::Synchronizing;
            }
            torques
        }
        (Phase::EngagingBrake, Mode::HighForce) => {
            next.brake_timer = ctrl.brake_timer + dt;
            match mode {
                Mode::HighForce => {
                    if next.brake_timer + 0.5 * dt >= gains.brake_delay {
                        next.phase = Phase::SteadyHf;
                    }
                    forcing(&mut next)
                }
                Mode::HighSpeed => {
                    let torques = synchronizing(&mut next);
                    if measured.w_1.abs() >= gains.w1_epsilon {
                        // M1 drifted out of the band before the brake bit.
                        next.phase = Phase::ReleasingBrake;
                        next.brake_timer = 0.0;
                    }
                    torques
                }
            }
        }
        (Phase::EngagingBrake, Mode::HighSpeed) => {
            let torques = preparing(&mut next);
            next.phase = Phase::ReleasingBrake;
            torques
        }
        (Phase::ReleasingBrake, Mode::HighSpeed) => preparing(&mut next),
        (Phase::ReleasingBrake, Mode::HighForce) => {
            // Brake is open again; treat the new request as a fresh down-shift.
            let torques = synchronizing(&mut next);
            next.phase = Phase::Synchronizing;
            next.brake_timer = 0.0;
            torques
        }
    };

    let (tau_1, tau_2) = saturate(p, tau_1, tau_2);
    Ok(ControllerOutput {
        tau_1,
        tau_2,
        brake: next.brake(),
        state: next,
    })
}

/// When a schedule entry takes effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trigger {
    /// At a fixed time, s.
    At(f64),
    /// When contact is detected from the output velocity.
    Auto,
}

/// One `time:mode` pair of a desired-mode schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEntry {
    pub trigger: Trigger,
    pub mode: Mode,
}

impl fmt::Display for ScheduleEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.trigger {
            Trigger::At(t) => write!(f, "{t}:{}", self.mode),
            Trigger::Auto => write!(f, "auto:{}", self.mode),
        }
    }
}

/// Controller settings of a scenario. Entries of `schedule` fire in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub tau_d: f64,
    pub schedule: Vec<ScheduleEntry>,
    pub c_prep: f64,
    pub c_sync: f64,
    pub w1_epsilon: f64,
    /// Output deceleration that counts as contact, rad/s².
    pub decel_threshold: f64,
    /// Controller-side wait after the brake command. Falls back to the
    /// actuator's mechanical delay when unset.
    pub brake_delay: Option<f64>,
    pub p_o_hat: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let gains = ControllerGains::default();
        Self {
            tau_d: crate::params::TABLE_HS_TORQUE / crate::params::TABLE_R1,
            schedule: vec![
                ScheduleEntry {
                    trigger: Trigger::At(0.0),
                    mode: Mode::HighSpeed,
                },
                ScheduleEntry {
                    trigger: Trigger::Auto,
                    mode: Mode::HighForce,
                },
            ],
            c_prep: gains.c_prep,
            c_sync: gains.c_sync,
            w1_epsilon: gains.w1_epsilon,
            decel_threshold: 200.0,
            brake_delay: None,
            p_o_hat: gains.p_o_hat,
        }
    }
}

impl ControllerConfig {
    pub fn gains(&self, p: &ActuatorParams) -> ControllerGains {
        ControllerGains {
            c_prep: self.c_prep,
            c_sync: self.c_sync,
            w1_epsilon: self.w1_epsilon,
            brake_delay: self.brake_delay.unwrap_or(p.brake_delay),
            p_o_hat: self.p_o_hat,
        }
    }

    /// Mode the actuator starts in: the first entry if it fires at t <= 0.
    pub fn initial_mode(&self) -> Mode {
        match self.schedule.first() {
            Some(ScheduleEntry {
                trigger: Trigger::At(t),
                mode,
            }) if *t <= 0.0 => *mode,
            _ => Mode::HighSpeed,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if !self.tau_d.is_finite() {
            return Err(ValidationError::new(&["tau_d"], "must be finite"));
        }
        if !(self.c_prep > 0.0) || !self.c_prep.is_finite() {
            return Err(ValidationError::new(&["C_prep"], "must be strictly positive"));
        }
        if !(self.c_sync > self.c_prep) || !self.c_sync.is_finite() {
            return Err(ValidationError::new(&["C_prep", "C_sync"], "C_sync must exceed C_prep"));
        }
        if !(self.w1_epsilon > 0.0) || !self.w1_epsilon.is_finite() {
            return Err(ValidationError::new(&["w1_epsilon"], "must be strictly positive"));
        }
        if !(self.decel_threshold > 0.0) || !self.decel_threshold.is_finite() {
            return Err(ValidationError::new(&["decel_threshold"], "must be strictly positive"));
        }
        if let Some(delay) = self.brake_delay {
            if !(delay >= 0.0) || !delay.is_finite() {
                return Err(ValidationError::new(&["brake_delay"], "must be non-negative"));
            }
        }
        if !self.p_o_hat.is_finite() {
            return Err(ValidationError::new(&["p_o_hat"], "must be finite"));
        }
        let mut last = f64::NEG_INFINITY;
        for entry in &self.schedule {
            if let Trigger::At(t) = entry.trigger {
                if !t.is_finite() || t < last {
                    return Err(ValidationError::new(
                        &["k_d_schedule"],
                        "times must be finite and non-decreasing",
                    ));
                }
                last = t;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{jump_impact_hs_simplified, HybridState};

    fn proto() -> ActuatorParams {
        ActuatorParams::prototype()
    }

    fn cmd(tau_d: f64, k_d: Mode) -> ControllerCommand {
        ControllerCommand { tau_d, k_d }
    }

    fn meas(w_o: f64, w_1: f64) -> Measurement {
        Measurement { w_o, w_1 }
    }

    #[test]
    fn routing_examples() {
        assert_eq!(torque_routing(&cmd(0.05, Mode::HighSpeed), Mode::HighSpeed), (0.05, 0.0));
        assert_eq!(torque_routing(&cmd(0.02, Mode::HighForce), Mode::HighForce), (0.0, 0.02));
        assert_eq!(torque_routing(&cmd(0.0, Mode::HighForce), Mode::HighSpeed), (0.0, 0.0));
    }

    #[test]
    fn speed_loop_without_error_is_plain_routing() {
        let p = proto();
        assert_eq!(nullspace_speed_loop(&p, 0.05, 12.0, 12.0, 100.0), (0.05, 0.0));
    }

    #[test]
    fn setpoint_zeroes_m1_after_predicted_impact() {
        let p = proto();
        assert_eq!(predicted_w1_setpoint(&p, 0.0), 0.0);
        let p_o = -0.03;
        let w1_d = predicted_w1_setpoint(&p, p_o);
        let after = jump_impact_hs_simplified(&p, &HybridState::high_speed(0.0, 7.0, w1_d), p_o).unwrap();
        assert!(after.w_1.abs() < 1e-12);
        assert_eq!(predicted_w1_setpoint(&p, -p_o), -w1_d);
        assert!((predicted_w1_setpoint(&p, 2.0 * p_o) - 2.0 * w1_d).abs() < 1e-12);
    }

    #[test]
    fn contact_detection_examples() {
        assert!(!detect_contact(&[2.0, 2.0], 1e-4, 500.0));
        assert!(detect_contact(&[2.0, 1.0], 1e-4, 500.0));
        assert!(!detect_contact(&[2.0, 1.99999], 1e-4, 500.0));
        assert!(!detect_contact(&[2.0], 1e-4, 500.0));
        // Moving away from the load.
        assert!(!detect_contact(&[-1.0, -2.0], 1e-4, 500.0));
    }

    #[test]
    fn saturation_examples() {
        let p = proto();
        assert_eq!(saturate(&p, 0.01, -0.01), (0.01, -0.01));
        let (a, b) = saturate(&p, 1.0, 1.0);
        assert!((a - 0.08696).abs() < 1e-5 && (b - 0.02954).abs() < 1e-5);
        let (a, b) = saturate(&p, -1.0, -1.0);
        assert!((a + 0.08696).abs() < 1e-5 && (b + 0.02954).abs() < 1e-5);
    }

    #[test]
    fn velocity_limit_only_blocks_driving_past_it() {
        let p = proto();
        assert_eq!(limit_drive(&p, Mode::HighForce, 0.02, 2.0), 0.0);
        assert_eq!(limit_drive(&p, Mode::HighForce, -0.02, 2.0), -0.02);
        assert_eq!(limit_drive(&p, Mode::HighSpeed, 0.05, 2.0), 0.05);
    }

    #[test]
    fn upshift_is_immediate() {
        let p = proto();
        let ctrl = ControllerState::new(ControllerGains::default(), Mode::HighForce);
        let out = controller_step(&p, &ctrl, &cmd(0.05, Mode::HighSpeed), meas(0.3, 0.0), Mode::HighForce, 1e-4)
            .unwrap();
        assert_eq!(out.brake, BrakeCommand::Open);
        assert_eq!(out.state.phase, Phase::SteadyHs);
    }

    #[test]
    fn synchronizing_waits_for_m1() {
        let p = proto();
        let mut ctrl = ControllerState::new(ControllerGains::default(), Mode::HighSpeed);
        ctrl.phase = Phase::Synchronizing;
        let out = controller_step(&p, &ctrl, &cmd(0.05, Mode::HighForce), meas(0.0, 3.0), Mode::HighSpeed, 1e-4)
            .unwrap();
        assert_eq!(out.brake, BrakeCommand::Open);
        assert_eq!(out.state.phase, Phase::Synchronizing);
        // The loop decelerates M1 through the nullspace.
        assert!(out.tau_2 > 0.0);

        let out = controller_step(&p, &ctrl, &cmd(0.05, Mode::HighForce), meas(0.0, 0.0), Mode::HighSpeed, 1e-4)
            .unwrap();
        assert_eq!(out.brake, BrakeCommand::Closed);
        assert_eq!(out.state.phase, Phase::EngagingBrake);
    }

    #[test]
    fn engaging_brake_finishes_after_delay() {
        let p = proto();
        let dt = 1e-4;
        let mut ctrl = ControllerState::new(ControllerGains::default(), Mode::HighSpeed);
        ctrl.phase = Phase::EngagingBrake;
        let command = cmd(0.05, Mode::HighForce);
        let mut steps = 0;
        let mut mode = Mode::HighSpeed;
        while ctrl.phase != Phase::SteadyHf {
            steps += 1;
            if steps == 100 {
                mode = Mode::HighForce;
            }
            let out = controller_step(&p, &ctrl, &command, meas(0.0, 0.0), mode, dt).unwrap();
            assert_eq!(out.brake, BrakeCommand::Closed);
            ctrl = out.state;
            assert!(steps < 200);
        }
        assert_eq!(steps, 100);
    }

    #[test]
    fn inconsistent_phase_is_a_fault() {
        let p = proto();
        let ctrl = ControllerState::new(ControllerGains::default(), Mode::HighForce);
        let err = controller_step(&p, &ctrl, &cmd(0.0, Mode::HighForce), meas(0.0, 0.0), Mode::HighSpeed, 1e-4)
            .unwrap_err();
        assert!(matches!(err, ControllerError::InternalFault { .. }));
        let err = controller_step(&p, &ctrl, &cmd(0.0, Mode::HighForce), meas(f64::NAN, 0.0), Mode::HighForce, 1e-4)
            .unwrap_err();
        assert_eq!(err, ControllerError::NonFiniteMeasurement);
    }

    #[test]
    fn aborted_downshift_releases_then_returns_to_high_speed() {
        let p = proto();
        let mut ctrl = ControllerState::new(ControllerGains::default(), Mode::HighSpeed);
        ctrl.phase = Phase::EngagingBrake;
        let out = controller_step(&p, &ctrl, &cmd(0.0, Mode::HighSpeed), meas(0.0, 0.0), Mode::HighSpeed, 1e-4)
            .unwrap();
        assert_eq!(out.state.phase, Phase::ReleasingBrake);
        assert_eq!(out.brake, BrakeCommand::Open);
        let out = controller_step(&p, &out.state, &cmd(0.0, Mode::HighSpeed), meas(0.0, 0.0), Mode::HighSpeed, 1e-4)
            .unwrap();
        assert_eq!(out.state.phase, Phase::SteadyHs);
    }

    #[test]
    fn engagement_aborts_when_m1_drifts() {
        let p = proto();
        let mut ctrl = ControllerState::new(ControllerGains::default(), Mode::HighSpeed);
        ctrl.phase = Phase::EngagingBrake;
        ctrl.brake_timer = 0.004;
        let out = controller_step(&p, &ctrl, &cmd(0.05, Mode::HighForce), meas(-1.0, 3.0), Mode::HighSpeed, 1e-4)
            .unwrap();
        assert_eq!(out.state.phase, Phase::ReleasingBrake);
        assert_eq!(out.brake, BrakeCommand::Open);
        let out = controller_step(&p, &out.state, &cmd(0.05, Mode::HighForce), meas(-1.0, 3.0), Mode::HighSpeed, 1e-4)
            .unwrap();
        assert_eq!(out.state.phase, Phase::Synchronizing);
        let out = controller_step(&p, &out.state, &cmd(0.05, Mode::HighForce), meas(-1.0, 0.1), Mode::HighSpeed, 1e-4)
            .unwrap();
        assert_eq!(out.state.phase, Phase::EngagingBrake);
        assert_eq!(out.state.brake_timer, 0.0);
    }

    #[test]
    fn phase_tokens_round_trip() {
        for phase in [
            Phase::SteadyHs,
            Phase::SteadyHf,
            Phase::Synchronizing,
            Phase::EngagingBrake,
            Phase::ReleasingBrake,
        ] {
            assert_eq!(Phase::from_token(phase.token()), Some(phase));
        }
    }
}
