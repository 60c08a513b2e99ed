//! Sixth-order synchronous machine parameters (per-unit, seconds).

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    /// Inertia `M` (p.u. power * s^2).
    pub inertia: f64,
    pub x_d: f64,
    pub x_d_prime: f64,
    pub x_d_dprime: f64,
    pub x_q: f64,
    pub x_q_prime: f64,
    pub x_q_dprime: f64,
    pub t_d_prime: f64,
    pub t_d_dprime: f64,
    pub t_q_prime: f64,
    pub t_q_dprime: f64,
    /// Constant excitation emf `E_f`.
    pub e_f: f64,
}

/// Relative tolerance for the `X''_d = X''_q` requirement.
const SALIENCY_TOL: f64 = 1e-12;

impl MachineParams {
    /// `X_d - X'_d`
    pub fn xd_hat(&self) -> f64 {
        self.x_d - self.x_d_prime
    }

    /// `X'_d - X''_d`
    pub fn xd_hat_prime(&self) -> f64 {
        self.x_d_prime - self.x_d_dprime
    }

    /// `X_q - X'_q`
    pub fn xq_hat(&self) -> f64 {
        self.x_q - self.x_q_prime
    }

    /// `X'_q - X''_q`
    pub fn xq_hat_prime(&self) -> f64 {
        self.x_q_prime - self.x_q_dprime
    }

    /// Every violated invariant, tagged with the offending field. `machine`
    /// is the 1-based index used in messages.
    pub fn violations(&self, machine: usize) -> Vec<Error> {
        let mut out = Vec::new();
        let mut bad = |field: &'static str, message: String| {
            out.push(Error::InvalidMachine { machine, field, message });
        };
        let all = [
            ("inertia", self.inertia),
            ("x_d", self.x_d),
            ("x_d_prime", self.x_d_prime),
            ("x_d_dprime", self.x_d_dprime),
            ("x_q", self.x_q),
            ("x_q_prime", self.x_q_prime),
            ("x_q_dprime", self.x_q_dprime),
            ("t_d_prime", self.t_d_prime),
            ("t_d_dprime", self.t_d_dprime),
            ("t_q_prime", self.t_q_prime),
            ("t_q_dprime", self.t_q_dprime),
            ("e_f", self.e_f),
        ];
        for (field, v) in all {
            if !v.is_finite() {
                bad(field, format!("must be finite, got {v}"));
            } else if field != "e_f" && v <= 0.0 {
                bad(field, format!("must be positive, got {v}"));
            }
        }
        if !(self.x_d > self.x_d_prime) {
            bad("x_d_prime", format!("reactance ordering X_d > X'_d violated ({} <= {})", self.x_d, self.x_d_prime));
        }
        if !(self.x_d_prime > self.x_d_dprime) {
            bad(
                "x_d_dprime",
                format!("reactance ordering X'_d > X''_d violated ({} <= {})", self.x_d_prime, self.x_d_dprime),
            );
        }
        if !(self.x_q > self.x_q_prime) {
            bad("x_q_prime", format!("reactance ordering X_q > X'_q violated ({} <= {})", self.x_q, self.x_q_prime));
        }
        if !(self.x_q_prime > self.x_q_dprime) {
            bad(
                "x_q_dprime",
                format!("reactance ordering X'_q > X''_q violated ({} <= {})", self.x_q_prime, self.x_q_dprime),
            );
        }
        if (self.x_d_dprime - self.x_q_dprime).abs() > SALIENCY_TOL * self.x_d_dprime.abs().max(1.0) {
            bad(
                "x_q_dprime",
                format!("subtransient saliency not allowed: X''_d = {} but X''_q = {}", self.x_d_dprime, self.x_q_dprime),
            );
        }
        out
    }

    pub fn validate(&self, machine: usize) -> Result<(), Error> {
        match self.violations(machine).into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::MachineParams;

    /// Reference round-rotor machine used throughout the tests.
    pub fn machine() -> MachineParams {
        MachineParams {
            inertia: 5.0,
            x_d: 1.8,
            x_d_prime: 0.3,
            x_d_dprime: 0.25,
            x_q: 1.7,
            x_q_prime: 0.55,
            x_q_dprime: 0.25,
            t_d_prime: 8.0,
            t_d_dprime: 0.03,
            t_q_prime: 0.4,
            t_q_dprime: 0.05,
            e_f: 1.2,
        }
    }
}
