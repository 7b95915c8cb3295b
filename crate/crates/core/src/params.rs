//! Actuator parameters and the inertia fit used for the default set.

use crate::error::ValidationError;

/// Reflected output inertia of the prototype in high-speed mode, kg·m².
pub const TABLE_HS_INERTIA: f64 = 0.004;
/// Reflected output inertia of the prototype in high-force mode, kg·m².
pub const TABLE_HF_INERTIA: f64 = 0.22;
/// Ratio of M2 to M1 reflected inertia, R2²·I_2 / (R1²·I_1).
pub const TABLE_REFLECTED_RATIO: f64 = 425.0;
/// M1 path reduction of the prototype.
pub const TABLE_R1: f64 = 23.0;
/// M2 path reduction of the prototype.
pub const TABLE_R2: f64 = 474.0;
/// Output torque limit in high-speed mode, N·m.
pub const TABLE_HS_TORQUE: f64 = 2.0;
/// Output torque limit in high-force mode, N·m.
pub const TABLE_HF_TORQUE: f64 = 14.0;
/// Output speed limit in high-speed mode, RPM.
pub const TABLE_HS_SPEED_RPM: f64 = 220.0;
/// Output speed limit in high-force mode, RPM.
pub const TABLE_HF_SPEED_RPM: f64 = 10.0;

const RPM_TO_RAD_S: f64 = std::f64::consts::PI / 30.0;

/// Port inertias recovered from per-mode reflected inertias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedInertias {
    pub i_o: f64,
    pub i_1: f64,
    pub i_2: f64,
}

impl FittedInertias {
    /// Solves
    ///
    /// ```text
    /// I_o + R2²·I_2 = hf_inertia
    /// I_o + R1²·I_1 = hs_inertia
    /// R2²·I_2       = ratio · R1²·I_1
    /// ```
    ///
    /// for the three port inertias. Fails when the inputs leave `I_o` or
    /// either motor inertia non-positive.
    pub fn solve(
        r1: f64,
        r2: f64,
        hs_inertia: f64,
        hf_inertia: f64,
        ratio: f64,
    ) -> Result<Self, ValidationError> {
        if !(ratio > 1.0) {
            return Err(ValidationError::new(&["ratio"], "reflected inertia ratio must exceed 1"));
        }
        let m1_reflected = (hf_inertia - hs_inertia) / (ratio - 1.0);
        let m2_reflected = ratio * m1_reflected;
        let i_o = hs_inertia - m1_reflected;
        if !(m1_reflected > 0.0) || !(i_o > 0.0) {
            return Err(ValidationError::new(
                &["hs_inertia", "hf_inertia", "ratio"],
                "per-mode inertias are inconsistent with a positive output inertia",
            ));
        }
        Ok(Self {
            i_o,
            i_1: m1_reflected / (r1 * r1),
            i_2: m2_reflected / (r2 * r2),
        })
    }

    /// The fit for the 1:23 / 1:474 prototype.
    pub fn prototype() -> Self {
        Self::solve(
            TABLE_R1,
            TABLE_R2,
            TABLE_HS_INERTIA,
            TABLE_HF_INERTIA,
            TABLE_REFLECTED_RATIO,
        )
        .expect("prototype table values are consistent")
    }
}

/// Lumped parameters of a dual-speed dual-motor actuator.
///
/// Torque limits are motor-side. Speed limits apply to the output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorParams {
    /// Total reduction on the M1 path.
    pub r1: f64,
    /// Total reduction on the M2 path.
    pub r2: f64,
    pub i_o: f64,
    pub i_1: f64,
    pub i_2: f64,
    pub b_o: f64,
    pub b_1: f64,
    pub b_2: f64,
    pub tau1_max: f64,
    pub tau2_max: f64,
    pub w_o_max_hs: f64,
    pub w_o_max_hf: f64,
    /// Delay between a brake-close command and mechanical engagement, s.
    pub brake_delay: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        Self::prototype()
    }
}

impl ActuatorParams {
    /// Fitted prototype parameters with the default damping and brake values.
    pub fn prototype() -> Self {
        let fit = FittedInertias::prototype();
        Self {
            r1: TABLE_R1,
            r2: TABLE_R2,
            i_o: fit.i_o,
            i_1: fit.i_1,
            i_2: fit.i_2,
            b_o: 0.01,
            b_1: 1e-6,
            b_2: 1e-6,
            tau1_max: TABLE_HS_TORQUE / TABLE_R1,
            tau2_max: TABLE_HF_TORQUE / TABLE_R2,
            w_o_max_hs: TABLE_HS_SPEED_RPM * RPM_TO_RAD_S,
            w_o_max_hf: TABLE_HF_SPEED_RPM * RPM_TO_RAD_S,
            brake_delay: 0.010,
        }
    }

    /// Same parameters with motor-side damping removed.
    pub fn without_motor_damping(mut self) -> Self {
        self.b_1 = 0.0;
        self.b_2 = 0.0;
        self
    }

    /// Same parameters with `extra` added to the output inertia, as when a
    /// load rides along with the output.
    pub fn with_output_inertia_added(mut self, extra: f64) -> Self {
        self.i_o += extra;
        self
    }

    /// R1²·I_1, M1 inertia seen at the output.
    pub fn m1_reflected_inertia(&self) -> f64 {
        self.r1 * self.r1 * self.i_1
    }

    /// R2²·I_2, M2 inertia seen at the output.
    pub fn m2_reflected_inertia(&self) -> f64 {
        self.r2 * self.r2 * self.i_2
    }

    /// Output inertia in high-force mode, I_o + R2²·I_2.
    pub fn hf_output_inertia(&self) -> f64 {
        self.i_o + self.m2_reflected_inertia()
    }

    /// First-order output inertia in high-speed mode, I_o + R1²·I_1.
    pub fn hs_output_inertia(&self) -> f64 {
        self.i_o + self.m1_reflected_inertia()
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let named = [
            ("R1", self.r1),
            ("R2", self.r2),
            ("I_o", self.i_o),
            ("I_1", self.i_1),
            ("I_2", self.i_2),
            ("b_o", self.b_o),
            ("b_1", self.b_1),
            ("b_2", self.b_2),
            ("tau1_max", self.tau1_max),
            ("tau2_max", self.tau2_max),
            ("w_o_max_hs", self.w_o_max_hs),
            ("w_o_max_hf", self.w_o_max_hf),
            ("brake_delay", self.brake_delay),
        ];
        for (key, value) in named {
            if !value.is_finite() {
                return Err(ValidationError::new(&[key], "must be finite"));
            }
        }
        if !(self.r1 > 1.0) {
            return Err(ValidationError::new(&["R1"], "must be greater than 1"));
        }
        if !(self.r2 > self.r1) {
            return Err(ValidationError::new(&["R1", "R2"], "R2 must be greater than R1"));
        }
        for (key, value) in [("I_o", self.i_o), ("I_1", self.i_1), ("I_2", self.i_2)] {
            if !(value > 0.0) {
                return Err(ValidationError::new(&[key], "inertia must be strictly positive"));
            }
        }
        for (key, value) in [("b_o", self.b_o), ("b_1", self.b_1), ("b_2", self.b_2)] {
            if value < 0.0 {
                return Err(ValidationError::new(&[key], "damping must be non-negative"));
            }
        }
        for (key, value) in [
            ("tau1_max", self.tau1_max),
            ("tau2_max", self.tau2_max),
            ("w_o_max_hs", self.w_o_max_hs),
            ("w_o_max_hf", self.w_o_max_hf),
        ] {
            if !(value > 0.0) {
                return Err(ValidationError::new(&[key], "limit must be strictly positive"));
            }
        }
        if self.brake_delay < 0.0 {
            return Err(ValidationError::new(&["brake_delay"], "must be non-negative"));
        }
        Ok(())
    }
}
