//! Coupling points between atoms and waveguide sites, and the time-dependent
//! coupling schedules used for pitch-catch transfer.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ChainSpec;

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// One atom-site coupling `g e^{i phase} a_site sigma_+ + h.c.`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingPoint {
    pub gsa: String,
    pub atom: usize,
    pub waveguide: String,
    pub site: i64,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub phase: f64,
    /// Schedule id; absent means a constant coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
}

impl CouplingPoint {
    pub fn new(
        gsa: impl Into<String>,
        atom: usize,
        waveguide: impl Into<String>,
        site: i64,
        amplitude: f64,
    ) -> Self {
        CouplingPoint {
            gsa: gsa.into(),
            atom,
            waveguide: waveguide.into(),
            site,
            amplitude,
            phase: 0.0,
            schedule: None,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_schedule(mut self, id: impl Into<String>) -> Self {
        self.schedule = Some(id.into());
        self
    }

    /// Complex coupling coefficient at full schedule strength.
    pub fn coefficient(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }
}

/// Two coupling points of one atom, `amplitude` at `left` and
/// `amplitude e^{i phase_diff}` at `left + separation`. The phase difference
/// always sits on the rightmost point.
pub fn giant_atom_pair(
    gsa: &str,
    atom: usize,
    waveguide: &str,
    left: i64,
    separation: i64,
    amplitude: f64,
    phase_diff: f64,
) -> [CouplingPoint; 2] {
    [
        CouplingPoint::new(gsa, atom, waveguide, left, amplitude),
        CouplingPoint::new(gsa, atom, waveguide, left + separation, amplitude).with_phase(phase_diff),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    EmitRamp,
    AbsorbRamp,
}

pub const DEFAULT_TRUNCATION: f64 = 1e-3;

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION
}

/// Coupling envelope
///
/// ```text
/// emit:   g(t) = g_max e^{b s} / (2 - e^{b s}),  s = t - t_ref < 0
///         g(t) = g_max,                          s >= 0
/// absorb: g'(t) = g(t_ref' - t) with the emit shape, t_ref' = t_ref + tau
/// ```
///
/// Envelope values below `epsilon * g_max` are clamped to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub id: String,
    pub kind: ScheduleKind,
    pub g_max: f64,
    #[serde(default)]
    pub beta: f64,
    /// Emit: end of the ramp-up. Absorb: start of the ramp-down.
    #[serde(default)]
    pub t_ref: f64,
    #[serde(default = "default_truncation")]
    pub epsilon: f64,
    /// Emit-ramp schedule this absorb-ramp mirrors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<String>,
}

impl Schedule {
    pub fn constant(id: impl Into<String>, g_max: f64) -> Self {
        Schedule {
            id: id.into(),
            kind: ScheduleKind::Constant,
            g_max,
            beta: 0.0,
            t_ref: 0.0,
            epsilon: DEFAULT_TRUNCATION,
            partner: None,
        }
    }

    pub fn emit(id: impl Into<String>, g_max: f64, beta: f64, t_ref: f64) -> Self {
        Schedule {
            id: id.into(),
            kind: ScheduleKind::EmitRamp,
            g_max,
            beta,
            t_ref,
            epsilon: DEFAULT_TRUNCATION,
            partner: None,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Time-reversed receiver envelope for an emitter, mirrored about
    /// `t_ref + tau / 2`.
    pub fn absorb_partner(emit: &Schedule, id: impl Into<String>, tau: f64) -> Self {
        Schedule {
            id: id.into(),
            kind: ScheduleKind::AbsorbRamp,
            g_max: emit.g_max,
            beta: emit.beta,
            t_ref: emit.t_ref + tau,
            epsilon: emit.epsilon,
            partner: Some(emit.id.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let path = format!("schedules[{}]", self.id);
        if !(self.g_max.is_finite() && self.g_max > 0.0) {
            return Err(Error::config(format!("{path}.g_max"), "g_max must be positive"));
        }
        if self.kind != ScheduleKind::Constant && !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::config(format!("{path}.beta"), "beta must be positive for ramps"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!("{path}.epsilon"), "epsilon must lie in (0, 1)"));
        }
        if !self.t_ref.is_finite() {
            return Err(Error::config(format!("{path}.t_ref"), "t_ref must be finite"));
        }
        Ok(())
    }

    /// Normalized ramp shape in `[0, 1]` for `s` measured from the end of the ramp.
    fn shape(&self, s: f64) -> f64 {
        if s >= 0.0 {
            return 1.0;
        }
        let e = (self.beta * s).exp();
        let f = e / (2.0 - e);
        if f < self.epsilon {
            0.0
        } else {
            f
        }
    }

    /// Coupling strength `g(t)` in `[0, g_max]`.
    pub fn value(&self, t: f64) -> f64 {
        self.g_max * self.scale(t)
    }

    /// `g(t) / g_max`.
    pub fn scale(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Constant => 1.0,
            ScheduleKind::EmitRamp => self.shape(t - self.t_ref),
            ScheduleKind::AbsorbRamp => self.shape(self.t_ref - t),
        }
    }

    /// Offset from `t_ref` at which the ramp crosses `epsilon` (negative).
    pub fn truncation_offset(&self) -> f64 {
        (2.0 * self.epsilon / (1.0 + self.epsilon)).ln() / self.beta
    }

    /// Earliest time at which the envelope is nonzero (emit) or latest (absorb).
    pub fn active_edge(&self) -> Option<f64> {
        match self.kind {
            ScheduleKind::Constant => None,
            ScheduleKind::EmitRamp => Some(self.t_ref + self.truncation_offset()),
            ScheduleKind::AbsorbRamp => Some(self.t_ref - self.truncation_offset()),
        }
    }
}

fn midpoint(sites: &[i64]) -> f64 {
    let (lo, hi) = sites
        .iter()
        .fold((i64::MAX, i64::MIN), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    0.5 * (lo as f64 + hi as f64)
}

/// Travel time of a wavepacket at `omega` from the midpoint of the emitter's
/// coupling points to the midpoint of the receiver's.
pub fn propagation_time(
    chain: &ChainSpec,
    omega: f64,
    emitter_sites: &[i64],
    receiver_sites: &[i64],
) -> Result<f64> {
    let v = chain.group_velocity(omega)?;
    if emitter_sites.is_empty() || receiver_sites.is_empty() {
        return Err(Error::config("coupling_points", "need at least one site per unit"));
    }
    Ok((midpoint(receiver_sites) - midpoint(emitter_sites)).abs() / v)
}

/// Relative ordering of two units' coupling-point pairs on one waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrangement {
    /// Interleaved, e.g. `0 < n1 < N < n2`.
    Braided,
    /// Disjoint intervals, e.g. `0 < N < n1 < n2`.
    Separate,
    /// One interval strictly inside the other.
    Nested,
    /// At least one shared site.
    Overlapping,
}

pub fn classify_arrangement(a: [i64; 2], b: [i64; 2]) -> Arrangement {
    let (a0, a1) = (a[0].min(a[1]), a[0].max(a[1]));
    let (b0, b1) = (b[0].min(b[1]), b[0].max(b[1]));
    if a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1 {
        Arrangement::Overlapping
    } else if a1 < b0 || b1 < a0 {
        Arrangement::Separate
    } else if (a0 < b0 && b1 < a1) || (b0 < a0 && a1 < b1) {
        Arrangement::Nested
    } else {
        Arrangement::Braided
    }
}
