//! Continuous dynamics and jump maps of the two-mode actuator.
//!
//! The state is `w = [w_o, w_1]`: output and M1 velocities. M2 velocity is
//! implied by the differential, `w_o = w_1/R1 + w_2/R2`. With the brake open
//! (high-speed mode) both coordinates are free and
//!
//! ```text
//! H·ẇ = −D·w + B·τ,   τ = [τ_1, τ_2, τ_o]
//! ```
//!
//! With the brake closed (high-force mode) M1 is held, `w_1 = 0`, and only
//! M2 drives the output through R2.

use std::fmt;
use std::str::FromStr;

use crate::error::{ModelError, Transition};
use crate::params::ActuatorParams;

/// Discrete operating mode, identified by the brake state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Brake open, both motors free, effective reduction R1.
    HighSpeed,
    /// Brake closed, M1 locked, M2 drives through R2.
    HighForce,
}

impl Mode {
    pub fn token(self) -> &'static str {
        match self {
            Mode::HighSpeed => "HS",
            Mode::HighForce => "HF",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HS" => Ok(Mode::HighSpeed),
            "HF" => Ok(Mode::HighForce),
            other => Err(format!("unknown mode `{other}` (expected HS or HF)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridState {
    pub mode: Mode,
    /// Output position, rad.
    pub theta_o: f64,
    /// Output velocity, rad/s.
    pub w_o: f64,
    /// M1 velocity, rad/s. Exactly zero in high-force mode.
    pub w_1: f64,
}

impl HybridState {
    pub fn high_speed(theta_o: f64, w_o: f64, w_1: f64) -> Self {
        Self {
            mode: Mode::HighSpeed,
            theta_o,
            w_o,
            w_1,
        }
    }

    pub fn high_force(theta_o: f64, w_o: f64) -> Self {
        Self {
            mode: Mode::HighForce,
            theta_o,
            w_o,
            w_1: 0.0,
        }
    }

    pub fn velocities(&self) -> [f64; 2] {
        [self.w_o, self.w_1]
    }

    pub fn is_finite(&self) -> bool {
        self.theta_o.is_finite() && self.w_o.is_finite() && self.w_1.is_finite()
    }
}

/// Motor electromagnetic torques (motor side) and the external output torque.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TorqueInput {
    pub tau_1: f64,
    pub tau_2: f64,
    pub tau_o: f64,
}

impl TorqueInput {
    pub fn new(tau_1: f64, tau_2: f64, tau_o: f64) -> Self {
        Self { tau_1, tau_2, tau_o }
    }

    pub fn motors(tau_1: f64, tau_2: f64) -> Self {
        Self { tau_1, tau_2, tau_o: 0.0 }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.tau_1, self.tau_2, self.tau_o]
    }
}

/// Time derivative of `[w_o, w_1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    pub dw_o: f64,
    pub dw_1: f64,
}

/// Dense 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn inverse(&self) -> Mat2 {
        let m = &self.0;
        let det = self.det();
        Mat2([
            [m[1][1] / det, -m[0][1] / det],
            [-m[1][0] / det, m[0][0] / det],
        ])
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// `½·vᵀ·M·v`
    pub fn half_quadratic(&self, v: [f64; 2]) -> f64 {
        let mv = self.mul_vec(v);
        0.5 * (v[0] * mv[0] + v[1] * mv[1])
    }
}

/// Mass matrix H of the brake-open configuration.
pub fn mass_matrix(p: &ActuatorParams) -> Mat2 {
    let coupling = -(p.r2 * p.r2 / p.r1) * p.i_2;
    let ratio = p.r2 / p.r1;
    Mat2([
        [p.i_o + p.r2 * p.r2 * p.i_2, coupling],
        [coupling, p.i_1 + ratio * ratio * p.i_2],
    ])
}

/// Damping matrix D of the brake-open configuration.
pub fn damping_matrix(p: &ActuatorParams) -> Mat2 {
    let coupling = -(p.r2 * p.r2 / p.r1) * p.b_2;
    let ratio = p.r2 / p.r1;
    Mat2([
        [p.b_o + p.r2 * p.r2 * p.b_2, coupling],
        [coupling, p.b_1 + ratio * ratio * p.b_2],
    ])
}

/// Input matrix B mapping `[τ_1, τ_2, τ_o]` to generalized forces on `[w_o, w_1]`.
pub fn input_matrix(p: &ActuatorParams) -> [[f64; 3]; 2] {
    [[0.0, p.r2, 1.0], [1.0, -p.r2 / p.r1, 0.0]]
}

/// Generalized forces `B·τ − D·w` for the brake-open configuration.
pub fn generalized_forces(p: &ActuatorParams, w: [f64; 2], u: &TorqueInput) -> [f64; 2] {
    let b = input_matrix(p);
    let tau = u.as_array();
    let damping = damping_matrix(p).mul_vec(w);
    let mut q = [0.0; 2];
    for (row, q_row) in q.iter_mut().enumerate() {
        *q_row = b[row][0] * tau[0] + b[row][1] * tau[1] + b[row][2] * tau[2] - damping[row];
    }
    q
}

/// M2 velocity from the differential constraint.
pub fn w2_from_state(p: &ActuatorParams, s: &HybridState) -> f64 {
    p.r2 * (s.w_o - s.w_1 / p.r1)
}

/// Quasi-static motor torques `(τ_1, τ_2)` holding an output torque `tau_o`,
/// from `R1·τ_1 = R2·τ_2 = −τ_o`.
pub fn static_torque_balance(p: &ActuatorParams, tau_o: f64) -> (f64, f64) {
    (-tau_o / p.r1, -tau_o / p.r2)
}

/// Kinetic energy `½·wᵀ·H·w`. Valid in both modes since `w_1 = 0` in HF.
pub fn kinetic_energy(p: &ActuatorParams, s: &HybridState) -> f64 {
    mass_matrix(p).half_quadratic(s.velocities())
}

/// Brake-closed output acceleration, no mode checks.
pub fn hf_output_acceleration(p: &ActuatorParams, w_o: f64, tau_2: f64, tau_o: f64) -> f64 {
    let inertia = p.hf_output_inertia();
    (-(p.b_o + p.r2 * p.r2 * p.b_2) * w_o + p.r2 * tau_2 + tau_o) / inertia
}

/// Brake-open accelerations, no mode checks.
pub fn hs_rates(p: &ActuatorParams, w_o: f64, w_1: f64, u: &TorqueInput) -> Rates {
    let q = generalized_forces(p, [w_o, w_1], u);
    let [dw_o, dw_1] = mass_matrix(p).inverse().mul_vec(q);
    Rates { dw_o, dw_1 }
}

/// High-force mode dynamics.
pub fn dynamics_hf(
    p: &ActuatorParams,
    s: &HybridState,
    u: &TorqueInput,
) -> Result<Rates, ModelError> {
    require_mode(s, Mode::HighForce)?;
    if s.w_1 != 0.0 {
        return Err(ModelError::HfInvariant { w_1: s.w_1 });
    }
    Ok(Rates {
        dw_o: hf_output_acceleration(p, s.w_o, u.tau_2, u.tau_o),
        dw_1: 0.0,
    })
}

/// High-speed mode dynamics, `ẇ = −H⁻¹D·w + H⁻¹B·τ`.
pub fn dynamics_hs(
    p: &ActuatorParams,
    s: &HybridState,
    u: &TorqueInput,
) -> Result<Rates, ModelError> {
    require_mode(s, Mode::HighSpeed)?;
    Ok(hs_rates(p, s.w_o, s.w_1, u))
}

/// Brake release. M1 starts free from rest, nothing jumps.
pub fn jump_upshift(s: &HybridState) -> Result<HybridState, ModelError> {
    require_transition(s, Mode::HighForce, Transition::Upshift)?;
    Ok(HybridState {
        mode: Mode::HighSpeed,
        theta_o: s.theta_o,
        w_o: s.w_o,
        w_1: 0.0,
    })
}

/// Brake engagement. A nonzero M1 velocity is absorbed by the brake and
/// shows up as an impulsive change of the output velocity.
pub fn jump_downshift(p: &ActuatorParams, s: &HybridState) -> Result<HybridState, ModelError> {
    require_transition(s, Mode::HighSpeed, Transition::Downshift)?;
    let w_o = if s.w_1 == 0.0 {
        s.w_o
    } else {
        s.w_o - s.w_1 / (p.r1 * (p.i_o / (p.i_2 * p.r2 * p.r2) + 1.0))
    };
    Ok(HybridState::high_force(s.theta_o, w_o))
}

/// Output impulse `p_o` with the brake open: `w⁺ = w⁻ + H⁻¹·[p_o, 0]`.
pub fn jump_impact_hs(
    p: &ActuatorParams,
    s: &HybridState,
    p_o: f64,
) -> Result<HybridState, ModelError> {
    require_transition(s, Mode::HighSpeed, Transition::ImpactHs)?;
    let h_inv = mass_matrix(p).inverse();
    let [dw_o, dw_1] = h_inv.mul_vec([p_o, 0.0]);
    Ok(HybridState {
        w_o: s.w_o + dw_o,
        w_1: s.w_1 + dw_1,
        ..*s
    })
}

/// Brake-open impact map for `R2²·I_2 ≫ R1²·I_1`: M2 does not move and the
/// whole velocity change goes to the output and M1.
pub fn jump_impact_hs_simplified(
    p: &ActuatorParams,
    s: &HybridState,
    p_o: f64,
) -> Result<HybridState, ModelError> {
    require_transition(s, Mode::HighSpeed, Transition::ImpactHs)?;
    let dw_o = p_o / p.hs_output_inertia();
    Ok(HybridState {
        w_o: s.w_o + dw_o,
        w_1: s.w_1 + p.r1 * dw_o,
        ..*s
    })
}

/// Output impulse with the brake closed. The brake is assumed not to slip.
pub fn jump_impact_hf(
    p: &ActuatorParams,
    s: &HybridState,
    p_o: f64,
) -> Result<HybridState, ModelError> {
    require_transition(s, Mode::HighForce, Transition::ImpactHf)?;
    if s.w_1 != 0.0 {
        return Err(ModelError::HfInvariant { w_1: s.w_1 });
    }
    Ok(HybridState::high_force(
        s.theta_o,
        s.w_o + p_o / p.hf_output_inertia(),
    ))
}

/// Motor torques `(τ_1, τ_2)` along the direction that leaves the output
/// acceleration untouched.
///
/// The generalized force of this pair is exactly `H·[0, 1]ᵀ·u`, so in the
/// brake-open dynamics it adds `u` to `ẇ_1` and nothing to `ẇ_o` (up to
/// motor-side damping).
pub fn nullspace_projection(p: &ActuatorParams, u: f64) -> (f64, f64) {
    (p.i_1 * u, -(p.r2 / p.r1) * p.i_2 * u)
}

/// Total inertia I_T of the brake-open input-output model.
pub fn hs_total_inertia(p: &ActuatorParams) -> f64 {
    let ratio = p.r1 / p.r2;
    p.i_o + p.m1_reflected_inertia() + ratio * ratio * (p.i_1 / p.i_2) * p.i_o
}

/// Total damping b_T of the brake-open input-output model.
///
/// The second term scales `b_o`, not a motor-side damping. This is what the
/// elimination of `ẇ_1` gives when `b_1 = b_2 = 0`.
pub fn hs_total_damping(p: &ActuatorParams) -> f64 {
    let ratio = p.r1 / p.r2;
    p.b_o + ratio * ratio * (p.i_1 / p.i_2) * p.b_o
}

/// Brake-open output dynamics with `w_1` eliminated, motor damping and
/// external torque dropped.
pub fn reduced_io_dynamics_hs(p: &ActuatorParams, w_o: f64, tau_1: f64, tau_2: f64) -> f64 {
    let m2_gain = p.r1 * (p.r1 * p.i_1) / (p.r2 * p.i_2);
    (p.r1 * tau_1 + m2_gain * tau_2 - hs_total_damping(p) * w_o) / hs_total_inertia(p)
}

/// Single-motor view of either mode: reduction R_k, inertia I_o + R_k²·I_k.
pub fn reduced_io_dynamics_moded(p: &ActuatorParams, mode: Mode, w_o: f64, tau_d: f64) -> f64 {
    let (ratio, motor_inertia) = match mode {
        Mode::HighSpeed => (p.r1, p.i_1),
        Mode::HighForce => (p.r2, p.i_2),
    };
    (ratio * tau_d - p.b_o * w_o) / (p.i_o + ratio * ratio * motor_inertia)
}

/// Inertia opposing an output impulse: 1 / (H⁻¹)₁₁ in HS, I_o + R2²·I_2 in HF.
pub fn effective_output_inertia(p: &ActuatorParams, mode: Mode) -> f64 {
    match mode {
        Mode::HighSpeed => {
            let h = mass_matrix(p);
            h.det() / h.0[1][1]
        }
        Mode::HighForce => p.hf_output_inertia(),
    }
}

fn require_mode(s: &HybridState, expected: Mode) -> Result<(), ModelError> {
    if s.mode == expected {
        Ok(())
    } else {
        Err(ModelError::WrongMode {
            expected,
            actual: s.mode,
        })
    }
}

fn require_transition(
    s: &HybridState,
    from: Mode,
    transition: Transition,
) -> Result<(), ModelError> {
    if s.mode == from {
        Ok(())
    } else {
        Err(ModelError::InvalidTransition {
            transition,
            mode: s.mode,
        })
    }
}
