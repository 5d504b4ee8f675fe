//! User-described systems: explicit chains, superatoms, couplings and
//! schedules, an initial atomic pattern and a list of observables.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    fidelity, AssembledSystem, AtomAmplitude, Basis, Pattern, PropagationOptions, System,
    SystemState,
};
use crate::error::{Error, Result};
use crate::scenarios::{RunOptions, Series};
use crate::superatom::dressed_modes;

fn default_sample() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomRun {
    pub system: System,
    pub initial: Vec<AtomAmplitude>,
    #[serde(default)]
    pub start: f64,
    pub horizon: f64,
    #[serde(default = "default_sample")]
    pub sample_interval: f64,
    #[serde(default)]
    pub observables: Vec<Observable>,
    /// Dressed modes that are meant to radiate into a waveguide; each must
    /// sit strictly inside that waveguide's band.
    #[serde(default)]
    pub propagating: Vec<PropagatingMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatingMode {
    pub gsa: String,
    pub waveguide: String,
    /// Dressed-mode index in ascending frequency; all modes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    #[default]
    Re,
    Im,
    Abs,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomRef {
    pub gsa: String,
    pub atom: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Observable {
    /// `|<target|psi>|` against a fixed atomic pattern.
    Fidelity {
        name: String,
        target: Vec<AtomAmplitude>,
    },
    /// Summed population of some (default all) atoms of one superatom.
    Population {
        name: String,
        gsa: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        atoms: Option<Vec<usize>>,
    },
    /// `c_a c_b^*`.
    Coherence {
        name: String,
        a: AtomRef,
        b: AtomRef,
        #[serde(default)]
        part: Part,
    },
    /// Total field population of one waveguide.
    Field { name: String, waveguide: String },
    /// Cumulative probability taken out by the absorbing layers.
    Absorbed {
        name: String,
        waveguide: String,
        #[serde(default)]
        side: Side,
    },
    Norm { name: String },
}

impl Observable {
    pub fn name(&self) -> &str {
        match self {
            Observable::Fidelity { name, .. }
            | Observable::Population { name, .. }
            | Observable::Coherence { name, .. }
            | Observable::Field { name, .. }
            | Observable::Absorbed { name, .. }
            | Observable::Norm { name } => name,
        }
    }
}

/// Observable with every reference resolved against a basis.
enum Probe {
    Fidelity(Pattern),
    Population(Vec<usize>),
    Coherence(usize, usize, Part),
    Field(std::ops::Range<usize>),
    Absorbed(usize, Side),
    Norm,
}

impl Probe {
    fn eval(&self, s: &SystemState, absorbed: &[crate::dynamics::AbsorbedFlux]) -> f64 {
        match self {
            Probe::Fidelity(p) => fidelity(s, p),
            Probe::Population(ix) => ix.iter().map(|&i| s.amplitudes[i].norm_sqr()).sum(),
            Probe::Coherence(a, b, part) => {
                let z = s.amplitudes[*a] * s.amplitudes[*b].conj();
                match part {
                    Part::Re => z.re,
                    Part::Im => z.im,
                    Part::Abs => z.norm(),
                }
            }
            Probe::Field(r) => s.amplitudes[r.clone()].iter().map(|a| a.norm_sqr()).sum(),
            Probe::Absorbed(chain, side) => {
                let a = &absorbed[*chain];
                match side {
                    Side::Left => a.left,
                    Side::Right => a.right,
                    Side::Both => a.left + a.right,
                }
            }
            Probe::Norm => s.norm(),
        }
    }
}

/// Final state and its basis, for state dumps.
pub struct CustomOutcome {
    pub series: Vec<Series>,
    pub basis: Basis,
    pub state: SystemState,
}

impl CustomRun {
    fn assemble(&self) -> Result<AssembledSystem> {
        AssembledSystem::new(self.system.clone()).map_err(|e| e.under("system"))
    }

    fn atom(basis: &Basis, path: &str, r: &AtomRef) -> Result<usize> {
        basis
            .atom_index(&r.gsa, r.atom)
            .ok_or_else(|| Error::config(path, format!("no atom {} in superatom `{}`", r.atom, r.gsa)))
    }

    fn probes(&self, sys: &AssembledSystem) -> Result<Vec<Probe>> {
        let basis = sys.basis();
        let mut seen = std::collections::HashSet::new();
        self.observables
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let path = format!("observables[{i}]");
                if !seen.insert(o.name()) {
                    return Err(Error::config(format!("{path}.name"), format!("duplicate name `{}`", o.name())));
                }
                Ok(match o {
                    Observable::Fidelity { target, .. } => Probe::Fidelity(basis.resolve(target)?),
                    Observable::Population { gsa, atoms, .. } => {
                        let block = basis
                            .superatom(gsa)
                            .ok_or_else(|| Error::config(format!("{path}.gsa"), format!("unknown superatom `{gsa}`")))?;
                        let ix = match atoms {
                            None => block.range().collect(),
                            Some(a) => a
                                .iter()
                                .map(|&k| Self::atom(basis, &format!("{path}.atoms"), &AtomRef { gsa: gsa.clone(), atom: k }))
                                .collect::<Result<_>>()?,
                        };
                        Probe::Population(ix)
                    }
                    Observable::Coherence { a, b, part, .. } => Probe::Coherence(
                        Self::atom(basis, &format!("{path}.a"), a)?,
                        Self::atom(basis, &format!("{path}.b"), b)?,
                        *part,
                    ),
                    Observable::Field { waveguide, .. } => Probe::Field(
                        basis
                            .chain(waveguide)
                            .ok_or_else(|| Error::config(format!("{path}.waveguide"), format!("unknown waveguide `{waveguide}`")))?
                            .range(),
                    ),
                    Observable::Absorbed { waveguide, side, .. } => Probe::Absorbed(
                        self.system
                            .chains
                            .iter()
                            .position(|c| &c.id == waveguide)
                            .ok_or_else(|| Error::config(format!("{path}.waveguide"), format!("unknown waveguide `{waveguide}`")))?,
                        *side,
                    ),
                    Observable::Norm { .. } => Probe::Norm,
                })
            })
            .collect()
    }

    /// Structural and physical checks, without propagating.
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config("horizon", "horizon must be positive"));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return Err(Error::config("sample_interval", "sample interval must be positive"));
        }
        let sys = self.assemble()?;
        if sys.basis().resolve(&self.initial)?.is_empty() {
            return Err(Error::config("initial", "initial pattern is empty"));
        }
        self.probes(&sys)?;
        for (i, p) in self.propagating.iter().enumerate() {
            let path = format!("propagating[{i}]");
            let gsa = self
                .system
                .superatom(&p.gsa)
                .ok_or_else(|| Error::config(format!("{path}.gsa"), format!("unknown superatom `{}`", p.gsa)))?;
            let chain = self
                .system
                .chain(&p.waveguide)
                .ok_or_else(|| Error::config(format!("{path}.waveguide"), format!("unknown waveguide `{}`", p.waveguide)))?;
            let modes = dressed_modes(gsa);
            if let Some(m) = p.mode {
                if m >= modes.len() {
                    return Err(Error::config(format!("{path}.mode"), format!("only {} modes", modes.len())));
                }
            }
            for m in modes.iter().filter(|m| p.mode.is_none_or(|k| k == m.index)) {
                if let Err(e @ Error::OutOfBand { .. }) = chain.wavevector_of(m.frequency) {
                    let (lo, hi) = chain.band();
                    return Err(Error::Physics {
                        path,
                        message: e.to_string(),
                        fix: format!(
                            "shift the frequencies of `{}` into ({lo}, {hi}) or drop this propagating entry",
                            p.gsa
                        ),
                    });
                }
            }
        }
        sys.check_light_cone(self.horizon).map_err(|e| e.under("system"))
    }

    pub fn execute(&self, opts: &RunOptions) -> Result<CustomOutcome> {
        self.validate()?;
        let sys = self.assemble()?;
        let probes = self.probes(&sys)?;
        let init = sys.basis().resolve(&self.initial)?;
        let psi = SystemState::from_pattern(sys.dim(), &init, self.start);
        let mut series: Vec<Series> = self
            .observables
            .iter()
            .map(|o| Series {
                name: o.name().to_string(),
                time: Vec::new(),
                values: Vec::new(),
            })
            .collect();
        let popts = PropagationOptions {
            dt: opts.overrides.dt,
            sample_interval: Some(self.sample_interval),
            execution: opts.execution,
            ..Default::default()
        };
        let horizon = opts.overrides.horizon.unwrap_or(self.horizon);
        let out = sys.propagate(&psi, self.start + horizon, &popts, |s, ab| {
            for (probe, ser) in probes.iter().zip(series.iter_mut()) {
                ser.time.push(s.time);
                ser.values.push(probe.eval(s, ab));
            }
        })?;
        Ok(CustomOutcome {
            series,
            basis: sys.basis().clone(),
            state: out.state,
        })
    }
}
