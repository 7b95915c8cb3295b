//! Randomized property checks of the model against an independent oracle.
//!
//! The oracle never looks at the model's H, D or B. It keeps the three rotor
//! coordinates `(θ_o, θ_1, θ_2)` with diagonal inertia and damping, adds the
//! differential constraint `w_o − w_1/R1 − w_2/R2 = 0` (plus `w_1 = 0` when
//! the brake holds) and solves each impact or acceleration as a KKT system
//! by Gaussian elimination.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::model::{self, HybridState, Mat2, Mode, Rates, TorqueInput};
use crate::params::ActuatorParams;

pub const DEFAULT_SEED: u64 = 0x5eed_d5d3;
pub const DEFAULT_CASES: usize = 1000;
pub const TOLERANCE: f64 = 1e-9;

/// The functions under test. Tests swap entries for mutants.
#[derive(Clone, Copy)]
pub struct Subject {
    pub mass_matrix: fn(&ActuatorParams) -> Mat2,
    pub input_matrix: fn(&ActuatorParams) -> [[f64; 3]; 2],
    pub dynamics_hs: fn(&ActuatorParams, &HybridState, &TorqueInput) -> Result<Rates, ModelError>,
    pub jump_downshift: fn(&ActuatorParams, &HybridState) -> Result<HybridState, ModelError>,
    pub jump_impact_hs: fn(&ActuatorParams, &HybridState, f64) -> Result<HybridState, ModelError>,
    pub jump_impact_hf: fn(&ActuatorParams, &HybridState, f64) -> Result<HybridState, ModelError>,
    pub nullspace_projection: fn(&ActuatorParams, f64) -> (f64, f64),
}

impl Default for Subject {
    fn default() -> Self {
        Self {
            mass_matrix: model::mass_matrix,
            input_matrix: model::input_matrix,
            dynamics_hs: model::dynamics_hs,
            jump_downshift: model::jump_downshift,
            jump_impact_hs: model::jump_impact_hs,
            jump_impact_hf: model::jump_impact_hf,
            nullspace_projection: model::nullspace_projection,
        }
    }
}

/// One random case: parameters, a brake-open state, an impulse and torques.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instance {
    pub params: ActuatorParams,
    pub state: HybridState,
    pub p_o: f64,
    pub torques: TorqueInput,
    /// Nullspace acceleration command, rad/s².
    pub u: f64,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Deterministic instance set for a seed.
pub fn instances(seed: u64, cases: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases)
        .map(|_| {
            let r1 = rng.gen_range(5.0..60.0);
            let r2 = r1 * rng.gen_range(2.0..40.0);
            let params = ActuatorParams {
                r1,
                r2,
                i_o: log_uniform(&mut rng, 1e-4, 1e-1),
                i_1: log_uniform(&mut rng, 1e-7, 1e-5),
                i_2: log_uniform(&mut rng, 1e-7, 1e-5),
                b_o: rng.gen_range(0.0..0.05),
                b_1: rng.gen_range(0.0..1e-5),
                b_2: rng.gen_range(0.0..1e-5),
                ..ActuatorParams::prototype()
            };
            let state = HybridState::high_speed(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-30.0..30.0),
                rng.gen_range(-500.0..500.0),
            );
            let torques = TorqueInput::new(
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-10.0..10.0),
            );
            Instance {
                params,
                state,
                p_o: rng.gen_range(-5.0..5.0),
                torques,
                u: rng.gen_range(-2000.0..2000.0),
            }
        })
        .collect()
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col] / pivot_row[col];
            for (cell, above) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *cell -= factor * above;
            }
            b[col + 1 + offset] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Rotor-space reference model.
pub mod oracle {
    use super::solve_linear;
    use crate::params::ActuatorParams;

    fn inertias(p: &ActuatorParams) -> [f64; 3] {
        [p.i_o, p.i_1, p.i_2]
    }

    fn differential(p: &ActuatorParams) -> [f64; 3] {
        [1.0, -1.0 / p.r1, -1.0 / p.r2]
    }

    const BRAKE: [f64; 3] = [0.0, 1.0, 0.0];

    /// Rotor velocities from `(w_o, w_1)`.
    pub fn rotor_velocities(p: &ActuatorParams, w_o: f64, w_1: f64) -> [f64; 3] {
        [w_o, w_1, p.r2 * (w_o - w_1 / p.r1)]
    }

    /// Solves `M·x − Aᵀλ = rhs`, `A·x = 0`.
    fn kkt(p: &ActuatorParams, constraints: &[[f64; 3]], rhs: [f64; 3]) -> [f64; 3] {
        let m = inertias(p);
        let n = 3 + constraints.len();
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for i in 0..3 {
            a[i][i] = m[i];
            b[i] = rhs[i];
        }
        for (k, row) in constraints.iter().enumerate() {
            for i in 0..3 {
                a[i][3 + k] = -row[i];
                a[3 + k][i] = row[i];
            }
        }
        let x = solve_linear(a, b).expect("KKT system is nonsingular for positive inertias");
        [x[0], x[1], x[2]]
    }

    fn constraints(p: &ActuatorParams, brake: bool) -> Vec<[f64; 3]> {
        if brake {
            vec![differential(p), BRAKE]
        } else {
            vec![differential(p)]
        }
    }

    /// Post-impact rotor velocities for an output impulse, brake open or held.
    pub fn impact(p: &ActuatorParams, w_o: f64, w_1: f64, p_o: f64, brake: bool) -> [f64; 3] {
        let w = rotor_velocities(p, w_o, w_1);
        let m = inertias(p);
        let rhs = [m[0] * w[0] + p_o, m[1] * w[1], m[2] * w[2]];
        kkt(p, &constraints(p, brake), rhs)
    }

    /// Rotor velocities right after the brake locks M1.
    pub fn brake_lock(p: &ActuatorParams, w_o: f64, w_1: f64) -> [f64; 3] {
        let w = rotor_velocities(p, w_o, w_1);
        let m = inertias(p);
        kkt(p, &constraints(p, true), [m[0] * w[0], m[1] * w[1], m[2] * w[2]])
    }

    /// Rotor accelerations with the brake open. Each torque acts on its own rotor.
    pub fn accelerations(p: &ActuatorParams, w_o: f64, w_1: f64, tau: [f64; 3]) -> [f64; 3] {
        let w = rotor_velocities(p, w_o, w_1);
        let [tau_1, tau_2, tau_o] = tau;
        let rhs = [tau_o - p.b_o * w[0], tau_1 - p.b_1 * w[1], tau_2 - p.b_2 * w[2]];
        kkt(p, &constraints(p, false), rhs)
    }

    /// `JᵀMJ` with `J` mapping `(w_o, w_1)` to rotor velocities.
    pub fn mass_matrix(p: &ActuatorParams) -> [[f64; 2]; 2] {
        let j = [[1.0, 0.0], [0.0, 1.0], [p.r2, -p.r2 / p.r1]];
        let m = inertias(p);
        let mut h = [[0.0; 2]; 2];
        for (r, row) in h.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| j[k][r] * m[k] * j[k][c]).sum();
            }
        }
        h
    }

    /// `Jᵀ` applied to rotor torques ordered `[τ_1, τ_2, τ_o]`.
    pub fn input_matrix(p: &ActuatorParams) -> [[f64; 3]; 2] {
        [[0.0, p.r2, 1.0], [1.0, -p.r2 / p.r1, 0.0]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest normalized error seen.
    pub worst: f64,
    /// Description of the first failing instance.
    pub first_failure: Option<String>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {:<20} {}/{} cases, worst error {:.3e}",
            self.name,
            self.cases - self.failures,
            self.cases,
            self.worst
        )?;
        if let Some(instance) = &self.first_failure {
            write!(f, "\n  first failing instance: {instance}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub properties: Vec<PropertyReport>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.properties.iter().all(PropertyReport::passed)
    }

    pub fn property(&self, name: &str) -> Option<&PropertyReport> {
        self.properties.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed {}", self.seed)?;
        for property in &self.properties {
            writeln!(f, "{property}")?;
        }
        Ok(())
    }
}

/// `|a − b|` relative to `scale`, with `scale` floored to avoid 0/0.
fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn describe(i: &Instance) -> String {
    format!("{i:?}")
}

struct Tally {
    report: PropertyReport,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            report: PropertyReport {
                name,
                cases: 0,
                failures: 0,
                worst: 0.0,
                first_failure: None,
            },
        }
    }

    /// Records one case whose error must not exceed `tol`.
    fn check(&mut self, error: f64, tol: f64, instance: &Instance) {
        self.report.cases += 1;
        let error = if error.is_nan() { f64::INFINITY } else { error };
        self.report.worst = self.report.worst.max(error);
        if error > tol {
            self.fail(instance);
        }
    }

    /// Records one case judged by a boolean.
    fn expect(&mut self, ok: bool, instance: &Instance) {
        self.report.cases += 1;
        if !ok {
            self.fail(instance);
        }
    }

    fn fail(&mut self, instance: &Instance) {
        self.report.failures += 1;
        if self.report.first_failure.is_none() {
            self.report.first_failure = Some(describe(instance));
        }
    }
}

/// `H·(w⁺ − w⁻) = [p_o, 0]ᵀ` for the brake-open impact map.
pub fn momentum_identity(subject: &Subject, cases: &[Instance]) -> PropertyReport {
    let mut tally = Tally::new("momentum_identity");
    for i in cases {
        let error = match (subject.jump_impact_hs)(&i.params, &i.state, i.p_o) {
            Ok(after) => {
                let h = model::mass_matrix(&i.params).0;
                let dw = [after.w_o - i.state.w_o, after.w_1 - i.state.w_1];
                let terms = |r: usize| [h[r][0] * dw[0], h[r][1] * dw[1]];
                let scale = i.p_o.abs().max(norm(&terms(0))).max(norm(&terms(1)));
                let r0 = rel(terms(0)[0] + terms(0)[1], i.p_o, scale);
                let r1 = rel(terms(1)[0] + terms(1)[1], 0.0, scale);
                r0.max(r1)
            }
            Err(_) => f64::INFINITY,
        };
        tally.check(error, TOLERANCE, i);
    }
    tally.report
}

/// Model matrices, accelerations and jump maps against the rotor-space oracle.
pub fn oracle_equivalence(subject: &Subject, cases: &[Instance]) -> PropertyReport {
    let mut tally = Tally::new("oracle_equivalence");
    for i in cases {
        let p = &i.params;
        let s = &i.state;
        let mut worst: f64 = 0.0;

        let h = (subject.mass_matrix)(p).0;
        let h_ref = oracle::mass_matrix(p);
        let h_scale = h_ref.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max(rel(h[r][c], h_ref[r][c], h_scale));
            }
        }
        let b = (subject.input_matrix)(p);
        let b_ref = oracle::input_matrix(p);
        let b_scale = b_ref.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
        for r in 0..2 {
            for c in 0..3 {
                worst = worst.max(rel(b[r][c], b_ref[r][c], b_scale));
            }
        }

        let tau = [i.torques.tau_1, i.torques.tau_2, i.torques.tau_o];
        match (subject.dynamics_hs)(p, s, &i.torques) {
            Ok(rates) => {
                let a = oracle::accelerations(p, s.w_o, s.w_1, tau);
                let scale = norm(&a[..2]);
                worst = worst.max(rel(rates.dw_o, a[0], scale)).max(rel(rates.dw_1, a[1], scale));
            }
            Err(_) => worst = f64::INFINITY,
        }

        let mut compare = |got: Result<HybridState, ModelError>, want: [f64; 3]| match got {
            Ok(after) => {
                let scale = norm(&[s.w_o, s.w_1]).max(norm(&want[..2]));
                worst = worst
                    .max(rel(after.w_o, want[0], scale))
                    .max(rel(after.w_1, want[1], scale));
            }
            Err(_) => worst = f64::INFINITY,
        };
        compare(
            (subject.jump_impact_hs)(p, s, i.p_o),
            oracle::impact(p, s.w_o, s.w_1, i.p_o, false),
        );
        compare(
            (subject.jump_downshift)(p, s),
            oracle::brake_lock(p, s.w_o, s.w_1),
        );
        let held = HybridState::high_force(s.theta_o, s.w_o);
        compare(
            (subject.jump_impact_hf)(p, &held, i.p_o),
            oracle::impact(p, s.w_o, 0.0, i.p_o, true),
        );

        tally.check(worst, TOLERANCE, i);
    }
    tally.report
}

/// With motor damping removed, the nullspace torque pair changes `ẇ_1` by
/// exactly `u` and leaves `ẇ_o` alone.
pub fn nullspace_invariance(subject: &Subject, cases: &[Instance]) -> PropertyReport {
    let mut tally = Tally::new("nullspace_invariance");
    for i in cases {
        let p = i.params.without_motor_damping();
        let (n1, n2) = (subject.nullspace_projection)(&p, i.u);
        let base = TorqueInput::motors(i.torques.tau_1, 0.0);
        let pushed = TorqueInput::motors(i.torques.tau_1 + n1, n2);
        let error = match ((subject.dynamics_hs)(&p, &i.state, &base), (subject.dynamics_hs)(&p, &i.state, &pushed)) {
            (Ok(a), Ok(b)) => {
                let scale = norm(&[a.dw_o, a.dw_1]).max(i.u.abs());
                rel(b.dw_o, a.dw_o, scale).max(rel(b.dw_1 - a.dw_1, i.u, scale))
            }
            _ => f64::INFINITY,
        };
        tally.check(error, TOLERANCE, i);
    }
    tally.report
}

/// Brake engagement loses kinetic energy when M1 moves and keeps it when M1
/// is at rest.
pub fn energy_dissipation(subject: &Subject, cases: &[Instance]) -> PropertyReport {
    let mut tally = Tally::new("energy_dissipation");
    for i in cases {
        let p = &i.params;
        let moving = (subject.jump_downshift)(p, &i.state);
        let resting_state = HybridState { w_1: 0.0, ..i.state };
        let resting = (subject.jump_downshift)(p, &resting_state);
        let ok = match (moving, resting) {
            (Ok(m), Ok(r)) => {
                let before = model::kinetic_energy(p, &i.state);
                let after = model::kinetic_energy(p, &m);
                let rest_before = model::kinetic_energy(p, &resting_state);
                let rest_after = model::kinetic_energy(p, &r);
                m.mode == Mode::HighForce
                    && (i.state.w_1 == 0.0 || after < before)
                    && rest_after == rest_before
            }
            _ => false,
        };
        tally.expect(ok, i);
    }
    tally.report
}

/// Runs every property over the same seeded instance set.
pub fn run_all(subject: &Subject, seed: u64, cases: usize) -> VerifyReport {
    let set = instances(seed, cases);
    VerifyReport {
        seed,
        properties: vec![
            momentum_identity(subject, &set),
            oracle_equivalence(subject, &set),
            nullspace_invariance(subject, &set),
            energy_dissipation(subject, &set),
        ],
    }
}
