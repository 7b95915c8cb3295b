//! Event-driven hybrid integration of the actuator, its controller and a load.
//!
//! Each step: sample the controller (torques held over the step), apply
//! brake release and constraint changes, then integrate with classical RK4.
//! Contact crossings, load sticking and brake engagement are located inside
//! the step; the jump is applied at the located time and the rest of the
//! step is re-integrated from there.

use crate::controller::{
    controller_step, detect_contact, BrakeCommand, ControllerCommand, ControllerConfig,
    ControllerState, Measurement, Phase, Trigger,
};
use crate::environment::{external_torque, inelastic_impulse, ContactEvent, ContactKind, LoadModel};
use crate::error::{ModelError, SimError, Transition, ValidationError};
use crate::metrics::{compute_metrics, Metrics};
use crate::model::{
    effective_output_inertia, generalized_forces, hf_output_acceleration, hs_rates,
    jump_downshift, jump_impact_hf, jump_impact_hs, jump_upshift, mass_matrix, w2_from_state,
    HybridState, Mode, TorqueInput,
};
use crate::params::ActuatorParams;
use crate::trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Fixed step, s.
    pub dt: f64,
    pub duration: f64,
    /// Time resolution of event location, s.
    pub event_tol: f64,
    /// Encoder resolution applied to controller measurements, rad. 0 = off.
    pub encoder_quantization: f64,
    /// Controller runs every `control_divisor` steps.
    pub control_divisor: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            duration: 0.3,
            event_tol: 1e-7,
            encoder_quantization: 0.0,
            control_divisor: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(ValidationError::new(&["dt"], "must satisfy 0 < dt <= 1e-3"));
        }
        if !(self.event_tol > 0.0 && self.event_tol < self.dt) {
            return Err(ValidationError::new(&["event_tol", "dt"], "event_tol must be in (0, dt)"));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(ValidationError::new(&["duration"], "must be finite and non-negative"));
        }
        if !(self.encoder_quantization >= 0.0) || !self.encoder_quantization.is_finite() {
            return Err(ValidationError::new(&["encoder_quantization"], "must be non-negative"));
        }
        if self.control_divisor == 0 {
            return Err(ValidationError::new(&["control_divisor"], "must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// A jump applied during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRecord {
    pub time: f64,
    pub kind: Transition,
    pub before: HybridState,
    pub after: HybridState,
    /// Output impulse for impacts, 0 otherwise.
    pub impulse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub trace: Vec<TraceRecord>,
    pub contacts: Vec<ContactEvent>,
    pub transitions: Vec<TransitionRecord>,
    pub metrics: Metrics,
}

/// Classical fourth-order step of `ẏ = f(y)` over `h`.
pub fn rk4<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], y: &[f64; N], h: f64) -> [f64; N] {
    let offset = |base: &[f64; N], k: &[f64; N], scale: f64| {
        let mut out = *base;
        for i in 0..N {
            out[i] += scale * k[i];
        }
        out
    };
    let k1 = f(y);
    let k2 = f(&offset(y, &k1, 0.5 * h));
    let k3 = f(&offset(y, &k2, 0.5 * h));
    let k4 = f(&offset(y, &k3, h));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// One RK4 step of the active mode's dynamics with the load's continuous
/// torque. Motor torques are held over the step; `tau_o` of `torques` is
/// added to the load torque.
pub fn integrate_step(
    p: &ActuatorParams,
    s: &HybridState,
    torques: &TorqueInput,
    load: &LoadModel,
    dt: f64,
) -> Result<HybridState, SimError> {
    if s.mode == Mode::HighForce && s.w_1 != 0.0 {
        return Err(SimError::Model {
            time: 0.0,
            source: ModelError::HfInvariant { w_1: s.w_1 },
        });
    }
    let mode = s.mode;
    let f = |y: &[f64; 3]| {
        let u = TorqueInput {
            tau_o: torques.tau_o + external_torque(load, y[0], y[1]),
            ..*torques
        };
        match mode {
            Mode::HighSpeed => {
                let r = hs_rates(p, y[1], y[2], &u);
                [y[1], r.dw_o, r.dw_1]
            }
            Mode::HighForce => [y[1], hf_output_acceleration(p, y[1], u.tau_2, u.tau_o), 0.0],
        }
    };
    let y = rk4(f, &[s.theta_o, s.w_o, s.w_1], dt);
    let next = HybridState {
        mode,
        theta_o: y[0],
        w_o: y[1],
        w_1: y[2],
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(SimError::Diverged { time: dt, last: None })
    }
}

/// Bisects `predicate` on `[t_start, t_end]` to within `tol`.
///
/// Returns the first bracket end on the far side of the sign change, or
/// `None` when the endpoints share a strict sign. A zero at `t_start` is an
/// event at `t_start`.
pub fn locate_event(
    predicate: impl Fn(f64) -> f64,
    t_start: f64,
    t_end: f64,
    tol: f64,
) -> Option<f64> {
    let f_start = predicate(t_start);
    if f_start == 0.0 {
        return Some(t_start);
    }
    let f_end = predicate(t_end);
    if f_end != 0.0 && (f_start < 0.0) == (f_end < 0.0) {
        return None;
    }
    let start_negative = f_start < 0.0;
    let (mut lo, mut hi) = (t_start, t_end);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = predicate(mid);
        if f_mid != 0.0 && (f_mid < 0.0) == start_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Applies one jump of the mode graph.
///
/// `constraint_activate` stops the output against a hard stop;
/// `constraint_release` changes no velocity.
pub fn apply_transition(
    p: &ActuatorParams,
    s: &HybridState,
    kind: Transition,
    p_o: f64,
) -> Result<HybridState, ModelError> {
    match kind {
        Transition::Upshift => jump_upshift(s),
        Transition::Downshift => jump_downshift(p, s),
        Transition::ImpactHs => jump_impact_hs(p, s, p_o),
        Transition::ImpactHf => jump_impact_hf(p, s, p_o),
        Transition::ConstraintActivate => Ok(HybridState { w_o: 0.0, ..*s }),
        Transition::ConstraintRelease => Ok(*s),
    }
}

/// Contact bookkeeping. `load_theta` is where the load surface currently is;
/// it only moves for an inertial load.
#[derive(Debug, Clone, Copy)]
struct Contact {
    active: bool,
    /// Output held at `w_o = 0` by the load.
    locked: bool,
    /// Inertial load riding on the output.
    attached: bool,
    load_theta: f64,
    /// Velocity of a detached inertial load.
    load_w: f64,
}

/// Everything that stays fixed while integrating one (sub)step.
struct Plant<'a> {
    params: &'a ActuatorParams,
    load: &'a LoadModel,
    mode: Mode,
    contact: Contact,
    tau_1: f64,
    tau_2: f64,
}

impl Plant<'_> {
    /// Parameters of the moving assembly: the load inertia joins the output
    /// while attached.
    fn moving_params(&self) -> ActuatorParams {
        match *self.load {
            LoadModel::InertialLoad { inertia, .. } if self.contact.attached => {
                self.params.with_output_inertia_added(inertia)
            }
            _ => *self.params,
        }
    }

    fn continuous_torque(&self, theta_o: f64, w_o: f64) -> f64 {
        match *self.load {
            LoadModel::InertialLoad {
                resistive_torque, ..
            } => {
                if self.contact.attached {
                    -resistive_torque
                } else {
                    0.0
                }
            }
            LoadModel::CompliantLoad { .. } => external_torque(self.load, theta_o, w_o),
            LoadModel::Free | LoadModel::FixedObstacle { .. } => 0.0,
        }
    }

    /// Torque the load must apply to hold the output still.
    fn holding_reaction(&self, w_1: f64) -> f64 {
        let p = self.params;
        match self.mode {
            Mode::HighForce => -p.r2 * self.tau_2,
            Mode::HighSpeed => {
                let h = mass_matrix(p);
                let q = generalized_forces(p, [0.0, w_1], &TorqueInput::motors(self.tau_1, self.tau_2));
                let dw_1 = q[1] / h.0[1][1];
                h.0[0][1] * dw_1 - q[0]
            }
        }
    }

    fn rates(&self, y: &[f64; 3]) -> [f64; 3] {
        let [theta_o, w_o, w_1] = *y;
        if self.contact.locked {
            let dw_1 = match self.mode {
                Mode::HighForce => 0.0,
                Mode::HighSpeed => {
                    let p = self.params;
                    let q = generalized_forces(p, [0.0, w_1], &TorqueInput::motors(self.tau_1, self.tau_2));
                    q[1] / mass_matrix(p).0[1][1]
                }
            };
            return [0.0, 0.0, dw_1];
        }
        let p = self.moving_params();
        let tau_o = self.continuous_torque(theta_o, w_o);
        match self.mode {
            Mode::HighSpeed => {
                let r = hs_rates(&p, w_o, w_1, &TorqueInput::new(self.tau_1, self.tau_2, tau_o));
                [w_o, r.dw_o, r.dw_1]
            }
            Mode::HighForce => [w_o, hf_output_acceleration(&p, w_o, self.tau_2, tau_o), 0.0],
        }
    }

    fn advance(&self, s: &HybridState, h: f64) -> HybridState {
        if h == 0.0 {
            return *s;
        }
        let y = rk4(|y| self.rates(y), &[s.theta_o, s.w_o, s.w_1], h);
        HybridState {
            mode: s.mode,
            theta_o: y[0],
            w_o: y[1],
            w_1: y[2],
        }
    }

    /// Surface position and velocity of a detached inertial load after `h`.
    fn advance_load(&self, h: f64) -> (f64, f64) {
        let (theta, w) = (self.contact.load_theta, self.contact.load_w);
        match *self.load {
            LoadModel::InertialLoad {
                inertia,
                resistive_torque,
                ..
            } if w > 0.0 && !self.contact.attached => {
                let decel = resistive_torque / inertia;
                let stop = if decel > 0.0 { w / decel } else { f64::INFINITY };
                let moving = h.min(stop);
                (theta + w * moving - 0.5 * decel * moving * moving, (w - decel * h).max(0.0))
            }
            _ => (theta, w),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StepEvent {
    BrakeEngages,
    Contact,
    Stick,
}

struct Run<'a> {
    params: &'a ActuatorParams,
    load: &'a LoadModel,
    cfg: &'a SimConfig,
    state: HybridState,
    contact: Contact,
    pending_engagement: Option<f64>,
    contacts: Vec<ContactEvent>,
    transitions: Vec<TransitionRecord>,
}

impl<'a> Run<'a> {
    fn plant(&self, tau_1: f64, tau_2: f64) -> Plant<'a> {
        Plant {
            params: self.params,
            load: self.load,
            mode: self.state.mode,
            contact: self.contact,
            tau_1,
            tau_2,
        }
    }

    fn transition(&mut self, time: f64, kind: Transition, p: &ActuatorParams, p_o: f64) -> Result<(), SimError> {
        let before = self.state;
        let after = apply_transition(p, &before, kind, p_o)
            .map_err(|source| SimError::Model { time, source })?;
        self.state = after;
        self.transitions.push(TransitionRecord {
            time,
            kind,
            before,
            after,
            impulse: p_o,
        });
        Ok(())
    }

    fn resistive_torque(&self) -> f64 {
        match *self.load {
            LoadModel::InertialLoad {
                resistive_torque, ..
            } => resistive_torque,
            _ => 0.0,
        }
    }

    fn release(&mut self, time: f64) {
        self.contact.active = false;
        self.contacts.push(ContactEvent {
            time,
            impulse: 0.0,
            kind: ContactKind::Release,
        });
    }

    fn detach(&mut self, time: f64) {
        self.contact.attached = false;
        self.contact.locked = false;
        self.contact.load_theta = self.state.theta_o;
        self.contact.load_w = self.state.w_o.max(0.0);
        self.release(time);
    }

    /// Decides, with the torques of the coming step, whether the load keeps
    /// holding, keeps riding, or lets go of the output.
    fn update_constraints(&mut self, time: f64, tau_1: f64, tau_2: f64) -> Result<(), SimError> {
        if !self.contact.active {
            return Ok(());
        }
        let plant = self.plant(tau_1, tau_2);
        let resist = self.resistive_torque();
        match *self.load {
            LoadModel::FixedObstacle { .. } => {
                if self.contact.locked && plant.holding_reaction(self.state.w_1) > 0.0 {
                    self.contact.locked = false;
                    self.transition(time, Transition::ConstraintRelease, &plant.moving_params(), 0.0)?;
                    self.release(time);
                }
            }
            LoadModel::InertialLoad { inertia, .. } => {
                if self.contact.locked || self.state.w_o <= 0.0 {
                    let reaction = plant.holding_reaction(self.state.w_1);
                    if reaction > 0.0 {
                        if self.contact.locked {
                            self.transition(time, Transition::ConstraintRelease, &plant.moving_params(), 0.0)?;
                        }
                        self.detach(time);
                    } else if reaction < -resist {
                        if self.contact.locked {
                            self.contact.locked = false;
                            self.transition(time, Transition::ConstraintRelease, &plant.moving_params(), 0.0)?;
                        }
                    } else if !self.contact.locked {
                        self.contact.locked = true;
                        self.transition(time, Transition::ConstraintActivate, &plant.moving_params(), 0.0)?;
                    }
                } else {
                    // Riding: the output must keep pushing the load forward.
                    let accel = plant.rates(&[self.state.theta_o, self.state.w_o, self.state.w_1])[1];
                    let push = inertia * accel + resist;
                    if push < 0.0 {
                        self.detach(time);
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Integrates `[t, t + dt]`, resolving events inside the step.
    fn advance(&mut self, t: f64, dt: f64, tau_1: f64, tau_2: f64) -> Result<(), SimError> {
        let end = t + dt;
        let mut now = t;
        for _ in 0..32 {
            let h = end - now;
            if h <= 1e-12 * dt {
                break;
            }
            let plant = self.plant(tau_1, tau_2);
            let start = self.state;
            let full = plant.advance(&start, h);

            let mut earliest: Option<(f64, StepEvent)> = None;
            let mut consider = |at: f64, ev: StepEvent| {
                if earliest.is_none_or(|(best, _)| at < best) {
                    earliest = Some((at, ev));
                }
            };
            if let Some(at) = self.pending_engagement {
                if self.state.mode == Mode::HighSpeed && at - now <= h * (1.0 + 1e-9) {
                    consider((at - now).max(0.0).min(h), StepEvent::BrakeEngages);
                }
            }
            if !self.contact.active && self.load.contact_angle().is_some() {
                let gap = |tau: f64| {
                    let s = plant.advance(&start, tau);
                    s.theta_o - plant.advance_load(tau).0
                };
                if gap(0.0) <= 0.0 && gap(h) > 0.0 {
                    if let Some(at) = locate_event(gap, 0.0, h, self.cfg.event_tol) {
                        consider(at, StepEvent::Contact);
                    }
                }
            }
            if self.contact.attached && !self.contact.locked && start.w_o > 0.0 && full.w_o <= 0.0 {
                let speed = |tau: f64| plant.advance(&start, tau).w_o;
                if let Some(at) = locate_event(speed, 0.0, h, self.cfg.event_tol) {
                    consider(at, StepEvent::Stick);
                }
            }

            let Some((at, event)) = earliest else {
                self.state = full;
                self.contact.load_theta = plant.advance_load(h).0;
                self.contact.load_w = plant.advance_load(h).1;
                break;
            };
            self.state = plant.advance(&start, at);
            let (load_theta, load_w) = plant.advance_load(at);
            self.contact.load_theta = load_theta;
            self.contact.load_w = load_w;
            now += at;
            if !self.state.is_finite() {
                return Err(SimError::Diverged { time: now, last: None });
            }
            match event {
                StepEvent::BrakeEngages => self.engage_brake(now, tau_1, tau_2)?,
                StepEvent::Contact => self.make_contact(now)?,
                StepEvent::Stick => {
                    self.state.w_o = 0.0;
                    self.update_constraints(now, tau_1, tau_2)?;
                }
            }
        }

        if self.contact.attached {
            self.contact.load_theta = self.state.theta_o;
        }
        // A spring contact ends once the output backs off the surface.
        if let LoadModel::CompliantLoad { contact_angle, .. } = *self.load {
            if self.contact.active && self.state.theta_o < contact_angle {
                self.release(end);
            }
        }
        if !self.state.is_finite() {
            return Err(SimError::Diverged { time: end, last: None });
        }
        Ok(())
    }

    fn engage_brake(&mut self, time: f64, tau_1: f64, tau_2: f64) -> Result<(), SimError> {
        self.pending_engagement = None;
        let moving = self.plant(tau_1, tau_2).moving_params();
        self.transition(time, Transition::Downshift, &moving, 0.0)?;
        if self.contact.locked {
            if self.state.w_o > 0.0 {
                self.state.w_o = 0.0;
            } else if self.state.w_o < 0.0 {
                // The brake kicked the output off the surface.
                self.transition(time, Transition::ConstraintRelease, &moving, 0.0)?;
                if self.contact.attached {
                    self.detach(time);
                } else {
                    self.contact.locked = false;
                    self.release(time);
                }
            }
        } else if self.contact.attached && self.state.w_o < 0.0 {
            self.detach(time);
        }
        Ok(())
    }

    fn make_contact(&mut self, time: f64) -> Result<(), SimError> {
        self.contact.active = true;
        let impact_kind = match self.state.mode {
            Mode::HighSpeed => Transition::ImpactHs,
            Mode::HighForce => Transition::ImpactHf,
        };
        let i_eff = effective_output_inertia(self.params, self.state.mode);
        match *self.load {
            LoadModel::FixedObstacle { .. } => {
                let p_o = inelastic_impulse(i_eff, f64::INFINITY, self.state.w_o, 0.0);
                if p_o != 0.0 {
                    self.transition(time, impact_kind, self.params, p_o)?;
                }
                self.contacts.push(ContactEvent {
                    time,
                    impulse: p_o,
                    kind: ContactKind::Impact,
                });
                self.contact.locked = true;
                self.transition(time, Transition::ConstraintActivate, self.params, 0.0)?;
                self.state.theta_o = self.contact.load_theta;
            }
            LoadModel::InertialLoad { .. } => {
                let p_o = inelastic_impulse(i_eff, self.inertial_load_inertia(), self.state.w_o, self.contact.load_w);
                if p_o != 0.0 {
                    self.transition(time, impact_kind, self.params, p_o)?;
                }
                self.contacts.push(ContactEvent {
                    time,
                    impulse: p_o,
                    kind: ContactKind::Impact,
                });
                self.contact.attached = true;
                self.contact.load_w = 0.0;
            }
            LoadModel::CompliantLoad { .. } => {
                self.contacts.push(ContactEvent {
                    time,
                    impulse: 0.0,
                    kind: ContactKind::Engage,
                });
            }
            LoadModel::Free => {}
        }
        Ok(())
    }

    fn inertial_load_inertia(&self) -> f64 {
        match *self.load {
            LoadModel::InertialLoad { inertia, .. } => inertia,
            _ => f64::INFINITY,
        }
    }

    fn record(&self, t: f64, phase: Phase, tau_1: f64, tau_2: f64) -> TraceRecord {
        let s = &self.state;
        let plant = self.plant(tau_1, tau_2);
        let tau_o = match *self.load {
            _ if self.contact.locked => plant.holding_reaction(s.w_1),
            LoadModel::InertialLoad {
                inertia,
                resistive_torque,
                ..
            } if self.contact.attached => {
                let accel = plant.rates(&[s.theta_o, s.w_o, s.w_1])[1];
                -(inertia * accel + resistive_torque)
            }
            _ => plant.continuous_torque(s.theta_o, s.w_o),
        };
        TraceRecord {
            t,
            mode: s.mode,
            ctrl_phase: phase,
            theta_o: s.theta_o,
            w_o: s.w_o,
            w_1: s.w_1,
            w_2: w2_from_state(self.params, s),
            tau_1,
            tau_2,
            tau_o,
            brake_engaged: s.mode == Mode::HighForce,
            contact_active: self.contact.active,
        }
    }
}

fn quantize(value: f64, resolution: f64, period: f64) -> f64 {
    if resolution > 0.0 {
        let step = resolution / period;
        (value / step).round() * step
    } else {
        value
    }
}

/// Runs a scenario from rest at `theta_o = 0`.
pub fn run_scenario(
    params: &ActuatorParams,
    load: &LoadModel,
    controller: &ControllerConfig,
    sim: &SimConfig,
) -> Result<SimOutput, SimError> {
    params.validate()?;
    load.validate()?;
    controller.validate()?;
    sim.validate()?;

    let initial_mode = controller.initial_mode();
    let mut run = Run {
        params,
        load,
        cfg: sim,
        state: HybridState {
            mode: initial_mode,
            theta_o: 0.0,
            w_o: 0.0,
            w_1: 0.0,
        },
        contact: Contact {
            active: false,
            locked: false,
            attached: false,
            load_theta: load.contact_angle().unwrap_or(f64::INFINITY),
            load_w: 0.0,
        },
        pending_engagement: None,
        contacts: Vec::new(),
        transitions: Vec::new(),
    };
    if let Some(angle) = load.contact_angle() {
        if angle <= 0.0 {
            // Starting on the surface: in contact from the first sample.
            run.contact.active = true;
            run.contact.locked = !matches!(load, LoadModel::CompliantLoad { .. });
            run.contact.attached = matches!(load, LoadModel::InertialLoad { .. });
        }
    }

    let gains = controller.gains(params);
    let mut ctrl = ControllerState::new(gains, initial_mode);
    let mut k_d = initial_mode;
    let mut next_entry = usize::from(matches!(
        controller.schedule.first(),
        Some(e) if matches!(e.trigger, Trigger::At(t) if t <= 0.0)
    ));
    let period = sim.dt * f64::from(sim.control_divisor);
    let mut last_measured_w_o: Option<f64> = None;
    let mut tau = (0.0, 0.0);
    let mut brake = ctrl.brake();

    let steps = sim.steps();
    let mut trace = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * sim.dt;
        if k % sim.control_divisor as usize == 0 {
            let measured = Measurement {
                w_o: quantize(run.state.w_o, sim.encoder_quantization, period),
                w_1: quantize(run.state.w_1, sim.encoder_quantization, period),
            };
            let contact_seen = last_measured_w_o.is_some_and(|prev| {
                detect_contact(&[prev, measured.w_o], period, controller.decel_threshold)
            });
            last_measured_w_o = Some(measured.w_o);
            while let Some(entry) = controller.schedule.get(next_entry) {
                let fires = match entry.trigger {
                    Trigger::At(at) => t + 1e-9 * sim.dt >= at,
                    Trigger::Auto => contact_seen,
                };
                if !fires {
                    break;
                }
                k_d = entry.mode;
                next_entry += 1;
            }
            let command = ControllerCommand {
                tau_d: controller.tau_d,
                k_d,
            };
            let out = controller_step(params, &ctrl, &command, measured, run.state.mode, period)
                .map_err(|source| SimError::Controller { time: t, source })?;
            ctrl = out.state;
            tau = (out.tau_1, out.tau_2);
            brake = out.brake;
        }

        match brake {
            BrakeCommand::Open => {
                run.pending_engagement = None;
                if run.state.mode == Mode::HighForce {
                    let moving = run.plant(tau.0, tau.1).moving_params();
                    run.transition(t, Transition::Upshift, &moving, 0.0)?;
                }
            }
            BrakeCommand::Closed => {
                if run.state.mode == Mode::HighSpeed && run.pending_engagement.is_none() {
                    run.pending_engagement = Some(t + params.brake_delay);
                }
            }
        }
        run.update_constraints(t, tau.0, tau.1)?;

        let record = run.record(t, ctrl.phase, tau.0, tau.1);
        trace.push(record);
        run.advance(t, sim.dt, tau.0, tau.1).map_err(|err| match err {
            SimError::Diverged { time, .. } => SimError::Diverged {
                time,
                last: Some(record),
            },
            other => other,
        })?;
    }

    let metrics = compute_metrics(params, &trace);
    Ok(SimOutput {
        trace,
        contacts: run.contacts,
        transitions: run.transitions,
        metrics,
    })
}
