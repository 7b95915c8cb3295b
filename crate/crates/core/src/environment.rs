//! Output-side world: what the actuator runs into.
//!
//! Every load sits on the positive side of the output. Contact is
//! unilateral: a load only pushes back, and only once `theta_o` reaches its
//! contact angle.

use std::fmt;

use crate::error::ValidationError;
use crate::model::{effective_output_inertia, Mode};
use crate::params::ActuatorParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadModel {
    Free,
    /// Immovable hard stop.
    FixedObstacle { contact_angle: f64 },
    /// Heavy object that moves with the output once hit, with Coulomb
    /// resistance opposing its motion.
    InertialLoad {
        inertia: f64,
        resistive_torque: f64,
        contact_angle: f64,
    },
    /// Spring-damper anchored at the contact angle.
    CompliantLoad {
        stiffness: f64,
        damping: f64,
        contact_angle: f64,
    },
}

impl LoadModel {
    pub const DEFAULT_CONTACT_ANGLE: f64 = 0.3;
    pub const DEFAULT_INERTIA: f64 = 0.5;
    pub const DEFAULT_RESISTIVE_TORQUE: f64 = 8.0;
    pub const DEFAULT_STIFFNESS: f64 = 50.0;
    pub const DEFAULT_DAMPING: f64 = 0.5;

    pub fn kind(&self) -> LoadKind {
        match self {
            LoadModel::Free => LoadKind::Free,
            LoadModel::FixedObstacle { .. } => LoadKind::Fixed,
            LoadModel::InertialLoad { .. } => LoadKind::Inertial,
            LoadModel::CompliantLoad { .. } => LoadKind::Compliant,
        }
    }

    pub fn contact_angle(&self) -> Option<f64> {
        match *self {
            LoadModel::Free => None,
            LoadModel::FixedObstacle { contact_angle }
            | LoadModel::InertialLoad { contact_angle, .. }
            | LoadModel::CompliantLoad { contact_angle, .. } => Some(contact_angle),
        }
    }

    /// Same load with its contact surface moved to `angle`.
    pub fn with_contact_angle(self, angle: f64) -> Self {
        match self {
            LoadModel::Free => LoadModel::Free,
            LoadModel::FixedObstacle { .. } => LoadModel::FixedObstacle {
                contact_angle: angle,
            },
            LoadModel::InertialLoad {
                inertia,
                resistive_torque,
                ..
            } => LoadModel::InertialLoad {
                inertia,
                resistive_torque,
                contact_angle: angle,
            },
            LoadModel::CompliantLoad {
                stiffness, damping, ..
            } => LoadModel::CompliantLoad {
                stiffness,
                damping,
                contact_angle: angle,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if let Some(angle) = self.contact_angle() {
            if !angle.is_finite() {
                return Err(ValidationError::new(&["contact_angle"], "must be finite"));
            }
        }
        match *self {
            LoadModel::InertialLoad {
                inertia,
                resistive_torque,
                ..
            } => {
                if !(inertia > 0.0) || !inertia.is_finite() {
                    return Err(ValidationError::new(&["I_L"], "must be strictly positive"));
                }
                if !(resistive_torque >= 0.0) || !resistive_torque.is_finite() {
                    return Err(ValidationError::new(
                        &["resistive_torque"],
                        "must be non-negative",
                    ));
                }
            }
            LoadModel::CompliantLoad {
                stiffness, damping, ..
            } => {
                if !(stiffness > 0.0) || !stiffness.is_finite() {
                    return Err(ValidationError::new(&["k_c"], "must be strictly positive"));
                }
                if !(damping >= 0.0) || !damping.is_finite() {
                    return Err(ValidationError::new(&["b_c"], "must be non-negative"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    Free,
    Fixed,
    Inertial,
    Compliant,
}

impl LoadKind {
    pub fn token(self) -> &'static str {
        match self {
            LoadKind::Free => "free",
            LoadKind::Fixed => "fixed",
            LoadKind::Inertial => "inertial",
            LoadKind::Compliant => "compliant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactKind {
    /// Impulsive contact, velocities jump.
    Impact,
    /// Contact begins without an impulse.
    Engage,
    /// Contact ends.
    Release,
}

impl fmt::Display for ContactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContactKind::Impact => "impact",
            ContactKind::Engage => "engage",
            ContactKind::Release => "release",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent {
    pub time: f64,
    /// Output impulse, N·m·s. Zero for engage and release.
    pub impulse: f64,
    pub kind: ContactKind,
}

/// Continuous torque a load applies to the output.
///
/// The fixed obstacle contributes nothing here: while it holds the output,
/// its reaction is a constraint force computed by the simulator.
pub fn external_torque(load: &LoadModel, theta_o: f64, w_o: f64) -> f64 {
    match *load {
        LoadModel::Free | LoadModel::FixedObstacle { .. } => 0.0,
        LoadModel::InertialLoad {
            resistive_torque,
            contact_angle,
            ..
        } => {
            if theta_o < contact_angle {
                0.0
            } else {
                coulomb_resistance(resistive_torque, w_o)
            }
        }
        LoadModel::CompliantLoad {
            stiffness,
            damping,
            contact_angle,
        } => {
            if theta_o < contact_angle {
                0.0
            } else {
                let push = -stiffness * (theta_o - contact_angle) - damping * w_o;
                push.min(0.0)
            }
        }
    }
}

/// `−resistive · sign(w)`, zero at rest.
pub fn coulomb_resistance(resistive_torque: f64, w: f64) -> f64 {
    if w > 0.0 {
        -resistive_torque
    } else if w < 0.0 {
        resistive_torque
    } else {
        0.0
    }
}

/// Fraction of a step at which `theta_o` reaches the contact angle,
/// assuming linear motion over the step.
pub fn detect_crossing(load: &LoadModel, theta_before: f64, theta_after: f64) -> Option<f64> {
    let angle = load.contact_angle()?;
    let before = theta_before - angle;
    let after = theta_after - angle;
    if before == 0.0 {
        return Some(0.0);
    }
    if (before < 0.0) == (after < 0.0) && after != 0.0 {
        return None;
    }
    Some((before / (before - after)).clamp(0.0, 1.0))
}

/// Impulse of a perfectly inelastic hit at the moment contact is located,
/// with the load at rest.
pub fn impact_impulse(p: &ActuatorParams, mode: Mode, load: &LoadModel, w_o_minus: f64) -> f64 {
    let i_eff = effective_output_inertia(p, mode);
    match *load {
        LoadModel::Free | LoadModel::CompliantLoad { .. } => 0.0,
        LoadModel::FixedObstacle { .. } => inelastic_impulse(i_eff, f64::INFINITY, w_o_minus, 0.0),
        LoadModel::InertialLoad { inertia, .. } => {
            inelastic_impulse(i_eff, inertia, w_o_minus, 0.0)
        }
    }
}

/// Impulse on the output bringing output and load to a common velocity.
///
/// `load_inertia = ∞` is an immovable obstacle. Zero when the output is not
/// closing on the load.
pub fn inelastic_impulse(output_inertia: f64, load_inertia: f64, w_o: f64, w_load: f64) -> f64 {
    let closing = w_o - w_load;
    if !(closing > 0.0) {
        return 0.0;
    }
    let reduced = if load_inertia.is_infinite() {
        output_inertia
    } else {
        output_inertia * load_inertia / (output_inertia + load_inertia)
    };
    -reduced * closing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{jump_impact_hf, jump_impact_hs, kinetic_energy, HybridState};

    fn compliant() -> LoadModel {
        LoadModel::CompliantLoad {
            stiffness: 50.0,
            damping: 0.5,
            contact_angle: 1.0,
        }
    }

    #[test]
    fn external_torque_examples() {
        assert_eq!(external_torque(&LoadModel::Free, 3.0, 2.0), 0.0);
        assert!((external_torque(&compliant(), 1.1, 0.0) + 5.0).abs() < 1e-12);
        assert_eq!(external_torque(&compliant(), 0.9, 1.0), 0.0);
        // Damper never pulls the output in.
        assert_eq!(external_torque(&compliant(), 1.0, -3.0), 0.0);
        let heavy = LoadModel::InertialLoad {
            inertia: 0.5,
            resistive_torque: 8.0,
            contact_angle: 0.0,
        };
        assert_eq!(external_torque(&heavy, 0.1, 1.0), -8.0);
        assert_eq!(external_torque(&heavy, 0.1, 0.0), 0.0);
    }

    #[test]
    fn crossing_examples() {
        let load = LoadModel::FixedObstacle { contact_angle: 1.0 };
        assert!((detect_crossing(&load, 0.9, 1.1).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(detect_crossing(&load, 0.2, 0.7), None);
        assert_eq!(detect_crossing(&load, 1.0, 1.2), Some(0.0));
        assert_eq!(detect_crossing(&load, 1.1, 1.2), None);
        assert_eq!(detect_crossing(&LoadModel::Free, 0.9, 1.1), None);
        assert!((detect_crossing(&load, 1.2, 0.8).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn impulse_examples() {
        let p = ActuatorParams::prototype();
        assert_eq!(impact_impulse(&p, Mode::HighSpeed, &compliant(), 3.0), 0.0);
        let fixed = LoadModel::FixedObstacle { contact_angle: 0.0 };
        let p_o = impact_impulse(&p, Mode::HighForce, &fixed, 1.0);
        assert!((p_o + 0.22).abs() < 1e-12);
        let s = jump_impact_hf(&p, &HybridState::high_force(0.0, 1.0), p_o).unwrap();
        assert!(s.w_o.abs() < 1e-12);

        let p_o = impact_impulse(&p, Mode::HighSpeed, &fixed, 4.0);
        let s = jump_impact_hs(&p, &HybridState::high_speed(0.0, 4.0, 90.0), p_o).unwrap();
        assert!(s.w_o.abs() < 1e-12);

        assert_eq!(impact_impulse(&p, Mode::HighSpeed, &fixed, -1.0), 0.0);
    }

    #[test]
    fn heavy_load_limit_is_the_fixed_obstacle() {
        let p = ActuatorParams::prototype();
        let fixed = impact_impulse(&p, Mode::HighSpeed, &LoadModel::FixedObstacle { contact_angle: 0.0 }, 2.0);
        let mut last_gap = f64::INFINITY;
        for inertia in [1.0, 1e2, 1e4, 1e6, 1e8] {
            let load = LoadModel::InertialLoad {
                inertia,
                resistive_torque: 0.0,
                contact_angle: 0.0,
            };
            let gap = (impact_impulse(&p, Mode::HighSpeed, &load, 2.0) - fixed).abs();
            assert!(gap < last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-9);
    }

    #[test]
    fn inertial_impact_conserves_momentum_and_dissipates() {
        let p = ActuatorParams::prototype();
        for mode in [Mode::HighSpeed, Mode::HighForce] {
            let load = LoadModel::InertialLoad {
                inertia: 0.5,
                resistive_torque: 8.0,
                contact_angle: 0.0,
            };
            let i_eff = effective_output_inertia(&p, mode);
            let before = match mode {
                Mode::HighSpeed => HybridState::high_speed(0.0, 3.0, 70.0),
                Mode::HighForce => HybridState::high_force(0.0, 0.8),
            };
            let p_o = impact_impulse(&p, mode, &load, before.w_o);
            let after = match mode {
                Mode::HighSpeed => jump_impact_hs(&p, &before, p_o).unwrap(),
                Mode::HighForce => jump_impact_hf(&p, &before, p_o).unwrap(),
            };
            // The load takes the output's post-impact velocity.
            let w_common = after.w_o;
            assert!((i_eff * before.w_o - (i_eff + 0.5) * w_common).abs() < 1e-12);
            let e_before = kinetic_energy(&p, &before);
            let e_after = kinetic_energy(&p, &after) + 0.25 * w_common * w_common;
            assert!(e_after < e_before);
        }
    }

    #[test]
    fn validation() {
        assert!(compliant().validate().is_ok());
        let bad = LoadModel::CompliantLoad {
            stiffness: 0.0,
            damping: 0.5,
            contact_angle: 0.0,
        };
        assert_eq!(bad.validate().unwrap_err().keys, vec!["k_c".to_string()]);
        let bad = LoadModel::InertialLoad {
            inertia: -1.0,
            resistive_torque: 0.0,
            contact_angle: 0.0,
        };
        assert!(bad.validate().is_err());
    }
}
