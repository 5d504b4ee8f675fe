//! Single-excitation Hamiltonian assembly, fixed-step RK4 propagation and
//! observables.
//!
//! Basis ordering (also the on-disk contract for state dumps): all atoms
//! first, superatom by superatom in declaration order, then the sites of each
//! waveguide in declaration order and ascending logical coordinate.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::ChainSpec;
use crate::layout::{CouplingPoint, Schedule, ScheduleKind};
use crate::parallel::{self, Execution};
use crate::superatom::SuperatomSpec;

/// Upper bound on the default step as a fraction of the inverse spectral
/// radius; a bare chain (radius `2 xi`) is capped at `0.02 / xi`.
pub const DT_FACTOR: f64 = 0.04;

/// Worst-case norm loss per unit time the default step is sized for.
pub const DRIFT_RATE: f64 = 5e-10;

/// Allowed norm deviation for Hermitian configurations before stepping is
/// declared unstable.
pub const NORM_TOLERANCE: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Everything that defines a Hamiltonian.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct System {
    #[serde(default)]
    pub chains: Vec<ChainSpec>,
    #[serde(default)]
    pub superatoms: Vec<SuperatomSpec>,
    #[serde(default)]
    pub couplings: Vec<CouplingPoint>,
    #[serde(default)]
    pub schedules: Vec<Schedule>,
}

impl System {
    pub fn chain(&self, id: &str) -> Option<&ChainSpec> {
        self.chains.iter().find(|c| c.id == id)
    }

    pub fn superatom(&self, id: &str) -> Option<&SuperatomSpec> {
        self.superatoms.iter().find(|s| s.id == id)
    }

    pub fn schedule(&self, id: &str) -> Option<&Schedule> {
        self.schedules.iter().find(|s| s.id == id)
    }

    /// Coupling points belonging to one superatom.
    pub fn points_of(&self, gsa: &str) -> Vec<CouplingPoint> {
        self.couplings.iter().filter(|p| p.gsa == gsa).cloned().collect()
    }

    pub fn has_absorbers(&self) -> bool {
        self.chains.iter().any(|c| c.is_absorbing())
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.chains {
            c.validate()?;
            if !seen.insert(c.id.as_str()) {
                return Err(Error::config(format!("chains[{}]", c.id), "duplicate waveguide id"));
            }
        }
        let mut seen = BTreeSet::new();
        for s in &self.superatoms {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::config(format!("superatoms[{}]", s.id), "duplicate superatom id"));
            }
        }
        let mut seen = BTreeSet::new();
        for s in &self.schedules {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::config(format!("schedules[{}]", s.id), "duplicate schedule id"));
            }
            if let Some(p) = &s.partner {
                match self.schedule(p) {
                    Some(e) if e.kind == ScheduleKind::EmitRamp => {}
                    _ => {
                        return Err(Error::config(
                            format!("schedules[{}].partner", s.id),
                            format!("`{p}` is not an emit-ramp schedule"),
                        ))
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        for (i, p) in self.couplings.iter().enumerate() {
            let path = format!("couplings[{i}]");
            let gsa = self.superatom(&p.gsa).ok_or_else(|| {
                Error::config(format!("{path}.gsa"), format!("unknown superatom `{}`", p.gsa))
            })?;
            if p.atom >= gsa.len() {
                return Err(Error::config(
                    format!("{path}.atom"),
                    format!("superatom `{}` has {} atoms", p.gsa, gsa.len()),
                ));
            }
            let chain = self.chain(&p.waveguide).ok_or_else(|| {
                Error::config(
                    format!("{path}.waveguide"),
                    format!("unknown waveguide `{}`", p.waveguide),
                )
            })?;
            if !chain.contains_site(p.site) {
                return Err(Error::config(
                    format!("{path}.site"),
                    format!(
                        "site {} outside waveguide `{}` [{}, {}]",
                        p.site,
                        chain.id,
                        chain.origin,
                        chain.last_site()
                    ),
                ));
            }
            if !(p.amplitude.is_finite() && p.amplitude >= 0.0) || !p.phase.is_finite() {
                return Err(Error::config(
                    format!("{path}.amplitude"),
                    "amplitude must be finite and non-negative, phase finite",
                ));
            }
            if let Some(s) = &p.schedule {
                if self.schedule(s).is_none() {
                    return Err(Error::config(
                        format!("{path}.schedule"),
                        format!("unknown schedule `{s}`"),
                    ));
                }
            }
            if !seen.insert((p.gsa.as_str(), p.atom, p.waveguide.as_str(), p.site)) {
                return Err(Error::config(
                    path,
                    "duplicate coupling point for the same atom and site",
                ));
            }
        }
        Ok(())
    }
}

/// A contiguous block of basis states owned by one superatom or waveguide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisBlock {
    pub id: String,
    pub offset: usize,
    pub len: usize,
    /// Logical coordinate of the first site (zero for superatoms).
    pub origin: i64,
}

impl BasisBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub superatoms: Vec<BasisBlock>,
    pub chains: Vec<BasisBlock>,
    dim: usize,
}

impl Basis {
    pub fn new(system: &System) -> Self {
        let mut offset = 0;
        let superatoms = system
            .superatoms
            .iter()
            .map(|s| {
                let b = BasisBlock {
                    id: s.id.clone(),
                    offset,
                    len: s.len(),
                    origin: 0,
                };
                offset += s.len();
                b
            })
            .collect();
        let chains = system
            .chains
            .iter()
            .map(|c| {
                let b = BasisBlock {
                    id: c.id.clone(),
                    offset,
                    len: c.num_sites,
                    origin: c.origin,
                };
                offset += c.num_sites;
                b
            })
            .collect();
        Basis {
            superatoms,
            chains,
            dim: offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_atoms(&self) -> usize {
        self.chains.first().map_or(self.dim, |c| c.offset)
    }

    pub fn superatom(&self, id: &str) -> Option<&BasisBlock> {
        self.superatoms.iter().find(|b| b.id == id)
    }

    pub fn chain(&self, id: &str) -> Option<&BasisBlock> {
        self.chains.iter().find(|b| b.id == id)
    }

    pub fn atom_index(&self, gsa: &str, atom: usize) -> Option<usize> {
        self.superatom(gsa)
            .filter(|b| atom < b.len)
            .map(|b| b.offset + atom)
    }

    pub fn site_index(&self, chain: &str, site: i64) -> Option<usize> {
        let b = self.chain(chain)?;
        let i = site - b.origin;
        (i >= 0 && (i as usize) < b.len).then(|| b.offset + i as usize)
    }

    /// Human-readable label of a basis state, e.g. `A[1]` or `w@-3`.
    pub fn label(&self, index: usize) -> String {
        for b in &self.superatoms {
            if b.range().contains(&index) {
                return format!("{}[{}]", b.id, index - b.offset);
            }
        }
        for b in &self.chains {
            if b.range().contains(&index) {
                return format!("{}@{}", b.id, b.origin + (index - b.offset) as i64);
            }
        }
        format!("#{index}")
    }

    /// 64-bit fingerprint of the ordering contract.
    pub fn contract_hash(&self) -> u64 {
        let mut text = String::from("gsa-basis-v1\n");
        for b in &self.superatoms {
            text.push_str(&format!("atoms {} {}\n", b.id, b.len));
        }
        for b in &self.chains {
            text.push_str(&format!("sites {} {} {}\n", b.id, b.origin, b.len));
        }
        let digest = Sha256::digest(text.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(head)
    }

    pub fn resolve(&self, pattern: &[AtomAmplitude]) -> Result<Pattern> {
        pattern
            .iter()
            .enumerate()
            .map(|(i, a)| {
                self.atom_index(&a.gsa, a.atom)
                    .map(|idx| (idx, Complex64::new(a.re, a.im)))
                    .ok_or_else(|| {
                        Error::config(
                            format!("pattern[{i}]"),
                            format!("no atom {} in superatom `{}`", a.atom, a.gsa),
                        )
                    })
            })
            .collect()
    }
}

/// One amplitude of an atomic state pattern, addressed by superatom and atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomAmplitude {
    pub gsa: String,
    pub atom: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl AtomAmplitude {
    pub fn new(gsa: impl Into<String>, atom: usize, re: f64) -> Self {
        AtomAmplitude {
            gsa: gsa.into(),
            atom,
            re,
            im: 0.0,
        }
    }
}

/// Sparse amplitude pattern over global basis indices.
pub type Pattern = Vec<(usize, Complex64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub time: f64,
    pub amplitudes: Vec<Complex64>,
}

impl SystemState {
    pub fn zeros(dim: usize, time: f64) -> Self {
        SystemState {
            time,
            amplitudes: vec![ZERO; dim],
        }
    }

    pub fn from_pattern(dim: usize, pattern: &[(usize, Complex64)], time: f64) -> Self {
        let mut s = SystemState::zeros(dim, time);
        for &(i, a) in pattern {
            s.amplitudes[i] += a;
        }
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn atoms<'a>(&'a self, basis: &Basis) -> &'a [Complex64] {
        &self.amplitudes[..basis.num_atoms()]
    }

    pub fn field<'a>(&'a self, basis: &Basis, chain: &str) -> Result<&'a [Complex64]> {
        let b = basis
            .chain(chain)
            .ok_or_else(|| Error::config("waveguide", format!("unknown waveguide `{chain}`")))?;
        Ok(&self.amplitudes[b.range()])
    }
}

/// Compressed-row sparse complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    /// Build from triplets; duplicates are summed, every row gets an explicit diagonal.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut rows: Vec<BTreeMap<usize, Complex64>> = (0..dim)
            .map(|r| BTreeMap::from([(r, ZERO)]))
            .collect();
        for &(r, c, v) in triplets {
            *rows[r].entry(c).or_insert(ZERO) += v;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseOperator {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(ZERO, |(_, v)| v)
    }

    /// Number of stored nonzero off-diagonal entries in row `r` with column in `cols`.
    pub fn count_in(&self, r: usize, cols: std::ops::Range<usize>) -> usize {
        self.row(r)
            .filter(|&(c, v)| c != r && cols.contains(&c) && v != ZERO)
            .count()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Exact (bitwise) Hermiticity.
    pub fn is_hermitian(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v.conj()))
    }

    /// `y = A x`. Each row is reduced in a fixed order, so the parallel and
    /// sequential paths give identical bits.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64], parallel: bool) {
        parallel::fill(y, parallel, |r| {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            acc
        });
    }

    fn add_to_diagonal(&mut self, shift: Complex64) {
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] == r {
                    self.vals[k] += shift;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DynamicCoupling {
    atom: usize,
    site: usize,
    coeff: Complex64,
    schedule: usize,
}

/// Absorber layer of one chain side, as basis indices with their potential.
#[derive(Debug, Clone, PartialEq)]
struct AbsorberLayer {
    chain: usize,
    right: bool,
    sites: Vec<(usize, f64)>,
}

/// Probability removed by the absorbing layers of one waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbedFlux {
    pub chain: String,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    system: System,
    basis: Basis,
    fixed: SparseOperator,
    dynamic: Vec<DynamicCoupling>,
    absorbers: Vec<AbsorberLayer>,
}

impl AssembledSystem {
    pub fn new(system: System) -> Result<Self> {
        system.validate()?;
        let basis = Basis::new(&system);
        let mut triplets = Vec::new();

        for (gsa, block) in system.superatoms.iter().zip(&basis.superatoms) {
            let h = gsa.hamiltonian();
            for r in 0..gsa.len() {
                for c in 0..gsa.len() {
                    if h[(r, c)] != 0.0 {
                        triplets.push((block.offset + r, block.offset + c, Complex64::from(h[(r, c)])));
                    }
                }
            }
        }

        let mut absorbers = Vec::new();
        for (ci, (chain, block)) in system.chains.iter().zip(&basis.chains).enumerate() {
            let hop = Complex64::from(chain.hopping);
            for i in 0..chain.num_sites {
                let r = block.offset + i;
                let diag = Complex64::new(chain.band_center, -chain.absorbing_potential(i));
                if diag != ZERO {
                    triplets.push((r, r, diag));
                }
                if i + 1 < chain.num_sites {
                    triplets.push((r, r + 1, hop));
                    triplets.push((r + 1, r, hop));
                }
            }
            let w = chain.absorber_width();
            if w > 0 {
                let layer = |range: std::ops::Range<usize>, right| AbsorberLayer {
                    chain: ci,
                    right,
                    sites: range
                        .map(|i| (block.offset + i, chain.absorbing_potential(i)))
                        .filter(|&(_, v)| v > 0.0)
                        .collect(),
                };
                absorbers.push(layer(0..w, false));
                absorbers.push(layer(chain.num_sites - w..chain.num_sites, true));
            }
        }

        let mut dynamic = Vec::new();
        for p in &system.couplings {
            let atom = basis.atom_index(&p.gsa, p.atom).expect("validated");
            let site = basis.site_index(&p.waveguide, p.site).expect("validated");
            let coeff = p.coefficient();
            let schedule = p.schedule.as_ref().and_then(|id| {
                let idx = system.schedules.iter().position(|s| &s.id == id).expect("validated");
                (system.schedules[idx].kind != ScheduleKind::Constant).then_some(idx)
            });
            match schedule {
                None => {
                    triplets.push((atom, site, coeff));
                    triplets.push((site, atom, coeff.conj()));
                }
                Some(schedule) => dynamic.push(DynamicCoupling {
                    atom,
                    site,
                    coeff,
                    schedule,
                }),
            }
        }

        let fixed = SparseOperator::from_triplets(basis.dim(), &triplets);
        Ok(AssembledSystem {
            system,
            basis,
            fixed,
            dynamic,
            absorbers,
        })
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.dynamic.is_empty()
    }

    pub fn is_hermitian_config(&self) -> bool {
        self.absorbers.is_empty()
    }

    fn schedule_scales(&self, t: f64) -> Vec<f64> {
        self.system.schedules.iter().map(|s| s.scale(t)).collect()
    }

    /// The full operator at time `t`.
    pub fn assemble(&self, t: f64) -> SparseOperator {
        let scales = self.schedule_scales(t);
        let mut triplets: Vec<(usize, usize, Complex64)> = (0..self.dim())
            .flat_map(|r| self.fixed.row(r).map(move |(c, v)| (r, c, v)))
            .collect();
        for d in &self.dynamic {
            let g = d.coeff * scales[d.schedule];
            triplets.push((d.atom, d.site, g));
            triplets.push((d.site, d.atom, g.conj()));
        }
        SparseOperator::from_triplets(self.dim(), &triplets)
    }

    /// `y = (H(t) - shift) x` using precomputed schedule scales.
    fn apply(
        &self,
        op: &SparseOperator,
        scales: &[f64],
        x: &[Complex64],
        y: &mut [Complex64],
        parallel: bool,
    ) {
        op.apply(x, y, parallel);
        for d in &self.dynamic {
            let g = d.coeff * scales[d.schedule];
            y[d.atom] += g * x[d.site];
            y[d.site] += g.conj() * x[d.atom];
        }
    }

    /// Gershgorin enclosure of the real part of the spectrum (couplings at
    /// full strength), as `(center, radius)`. Absorber damping is left out.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut center = vec![0.0; self.dim()];
        let mut radius = vec![0.0; self.dim()];
        for r in 0..self.dim() {
            for (c, v) in self.fixed.row(r) {
                if c == r {
                    center[r] = v.re;
                } else {
                    radius[r] += v.norm();
                }
            }
        }
        for d in &self.dynamic {
            radius[d.atom] += d.coeff.norm();
            radius[d.site] += d.coeff.norm();
        }
        let (lo, hi) = center
            .iter()
            .zip(&radius)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (c, r)| {
                (lo.min(c - r), hi.max(c + r))
            });
        if lo > hi {
            return (0.0, 0.0);
        }
        (0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    /// Default step. RK4 shrinks an eigencomponent at `lambda` by about
    /// `(lambda dt)^6 / 144` per step, so with `|lambda| <= radius` the loss
    /// per unit time stays below `DRIFT_RATE` when
    /// `dt^5 radius^6 <= 144 DRIFT_RATE`. Capped at `DT_FACTOR / radius`.
    pub fn default_dt(&self) -> f64 {
        let (_, radius) = self.spectral_bounds();
        if radius <= 0.0 {
            return DT_FACTOR;
        }
        let drift = (144.0 * DRIFT_RATE).powf(0.2) * radius.powf(-1.2);
        drift.min(DT_FACTOR / radius)
    }

    /// Reject hard-wall chains short enough for a signal from the coupling
    /// region to reach a wall and return within `t_total`.
    pub fn check_light_cone(&self, t_total: f64) -> Result<()> {
        for chain in self.system.chains.iter().filter(|c| !c.is_absorbing()) {
            let sites: Vec<i64> = self
                .system
                .couplings
                .iter()
                .filter(|p| p.waveguide == chain.id)
                .map(|p| p.site)
                .collect();
            let (Some(lo), Some(hi)) = (sites.iter().min(), sites.iter().max()) else {
                continue;
            };
            let need = chain.light_cone_sites(t_total, (hi - lo) as u64);
            if chain.num_sites < need {
                return Err(Error::Physics {
                    path: format!("chains[{}].num_sites", chain.id),
                    message: format!(
                        "{} sites let reflections from the hard walls return within t = {t_total}",
                        chain.num_sites
                    ),
                    fix: format!("use at least {need} sites or an absorbing boundary"),
                });
            }
        }
        Ok(())
    }

    /// `<psi| H(t) |psi>`.
    pub fn expectation(&self, state: &SystemState) -> Complex64 {
        let mut y = vec![ZERO; self.dim()];
        let scales = self.schedule_scales(state.time);
        self.apply(&self.fixed, &scales, &state.amplitudes, &mut y, false);
        state
            .amplitudes
            .iter()
            .zip(&y)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn absorption_rates(&self, x: &[Complex64], out: &mut [f64]) {
        for (o, layer) in out.iter_mut().zip(&self.absorbers) {
            *o = layer
                .sites
                .iter()
                .map(|&(i, v)| 2.0 * v * x[i].norm_sqr())
                .sum();
        }
    }

    fn flux_report(&self, acc: &[f64]) -> Vec<AbsorbedFlux> {
        let mut out: Vec<AbsorbedFlux> = Vec::new();
        for (layer, a) in self.absorbers.iter().zip(acc) {
            let id = &self.system.chains[layer.chain].id;
            if out.last().is_none_or(|f| &f.chain != id) {
                out.push(AbsorbedFlux {
                    chain: id.clone(),
                    left: 0.0,
                    right: 0.0,
                });
            }
            let f = out.last_mut().expect("pushed");
            if layer.right {
                f.right = *a;
            } else {
                f.left = *a;
            }
        }
        out
    }

    /// Integrate `i d psi/dt = H(t) psi` from `initial.time` to `t_end`.
    ///
    /// `observer` sees the initial state and every sample (the last one at
    /// exactly `t_end`) together with the probability absorbed so far.
    pub fn propagate<F>(
        &self,
        initial: &SystemState,
        t_end: f64,
        options: &PropagationOptions,
        mut observer: F,
    ) -> Result<Propagation>
    where
        F: FnMut(&SystemState, &[AbsorbedFlux]),
    {
        let t0 = initial.time;
        let span = t_end - t0;
        if initial.amplitudes.len() != self.dim() {
            return Err(Error::config(
                "initial",
                format!("state has {} amplitudes, basis has {}", initial.amplitudes.len(), self.dim()),
            ));
        }
        if !(span.is_finite() && span >= 0.0) {
            return Err(Error::config("integration.horizon", "end time must not precede start"));
        }
        let dt_max = options.dt.unwrap_or_else(|| self.default_dt());
        if !(dt_max.is_finite() && dt_max > 0.0) {
            return Err(Error::config("integration.dt", "dt must be positive"));
        }

        let n_samples = match options.sample_interval {
            Some(iv) if iv > 0.0 && span > 0.0 => ((span / iv) - 1e-9).ceil().max(1.0) as usize,
            _ => 1,
        };
        let per_sample = if span > 0.0 {
            ((span / n_samples as f64 / dt_max) - 1e-9).ceil().max(1.0) as usize
        } else {
            0
        };
        let total = n_samples * per_sample;
        let dt = if total > 0 { span / total as f64 } else { 0.0 };

        let (shift, _) = self.spectral_bounds();
        let mut op = self.fixed.clone();
        op.add_to_diagonal(Complex64::from(-shift));
        let parallel = options.execution.parallel_rows(self.dim());

        let dim = self.dim();
        let mut psi = initial.amplitudes.clone();
        let mut k = [vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim]];
        let mut tmp = vec![ZERO; dim];
        let mut rates = vec![0.0; self.absorbers.len()];
        let mut next_rates = vec![0.0; self.absorbers.len()];
        let mut absorbed = vec![0.0; self.absorbers.len()];
        self.absorption_rates(&psi, &mut rates);

        let norm0 = initial.norm();
        let hermitian = self.is_hermitian_config();
        let mut out = initial.clone();
        observer(&out, &self.flux_report(&absorbed));

        for step in 0..total {
            let t = t0 + step as f64 * dt;
            let s0 = self.schedule_scales(t);
            let sh = self.schedule_scales(t + 0.5 * dt);
            let s1 = self.schedule_scales(t + dt);

            // k_j = -i (H - shift) (psi + c_j dt k_{j-1})
            self.apply(&op, &s0, &psi, &mut k[0], parallel);
            for (stage, (c, sc)) in [(0.5, &sh), (0.5, &sh), (1.0, &s1)].into_iter().enumerate() {
                let h = c * dt;
                for ((x, p), kp) in tmp.iter_mut().zip(&psi).zip(&k[stage]) {
                    *x = p - I * h * kp;
                }
                let (_, rest) = k.split_at_mut(stage + 1);
                self.apply(&op, sc, &tmp, &mut rest[0], parallel);
            }
            let w = dt / 6.0;
            for (i, p) in psi.iter_mut().enumerate() {
                *p -= I * w * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }

            if !self.absorbers.is_empty() {
                self.absorption_rates(&psi, &mut next_rates);
                for ((a, r0), r1) in absorbed.iter_mut().zip(&rates).zip(&next_rates) {
                    *a += 0.5 * dt * (r0 + r1);
                }
                std::mem::swap(&mut rates, &mut next_rates);
            }

            if (step + 1) % per_sample == 0 {
                let t_now = if step + 1 == total {
                    t_end
                } else {
                    t0 + (step + 1) as f64 * dt
                };
                let phase = Complex64::from_polar(1.0, -shift * (t_now - t0));
                out.time = t_now;
                for (o, p) in out.amplitudes.iter_mut().zip(&psi) {
                    *o = phase * p;
                }
                let norm = out.norm();
                if !norm.is_finite() || (hermitian && (norm - norm0).abs() > options.norm_tolerance)
                {
                    return Err(Error::NormDrift { time: t_now, norm });
                }
                observer(&out, &self.flux_report(&absorbed));
            }
        }

        Ok(Propagation {
            state: out,
            absorbed: self.flux_report(&absorbed),
            dt,
            steps: total,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOptions {
    /// Upper bound on the step; the actual step divides the sample interval.
    pub dt: Option<f64>,
    /// Spacing of observer callbacks; `None` reports only the endpoints.
    pub sample_interval: Option<f64>,
    pub execution: Execution,
    pub norm_tolerance: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            dt: None,
            sample_interval: None,
            execution: Execution::Auto,
            norm_tolerance: NORM_TOLERANCE,
        }
    }
}

impl PropagationOptions {
    pub fn sampled(interval: f64) -> Self {
        PropagationOptions {
            sample_interval: Some(interval),
            ..Default::default()
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub state: SystemState,
    pub absorbed: Vec<AbsorbedFlux>,
    pub dt: f64,
    pub steps: usize,
}

/// `|sum_l conj(target_l) c_l|`, without renormalizing the atomic part.
pub fn fidelity(state: &SystemState, target: &[(usize, Complex64)]) -> f64 {
    target
        .iter()
        .map(|&(i, t)| t.conj() * state.amplitudes[i])
        .sum::<Complex64>()
        .norm()
}

/// `c_l conj(c_l')`.
pub fn coherence(state: &SystemState, l: usize, lp: usize) -> Complex64 {
    state.amplitudes[l] * state.amplitudes[lp].conj()
}

pub fn population(state: &SystemState, indices: impl IntoIterator<Item = usize>) -> f64 {
    indices
        .into_iter()
        .map(|i| state.amplitudes[i].norm_sqr())
        .sum()
}

pub fn field_intensity(state: &SystemState, basis: &Basis, chain: &str) -> Result<Vec<f64>> {
    Ok(state.field(basis, chain)?.iter().map(|a| a.norm_sqr()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalFractions {
    pub left: f64,
    pub right: f64,
    /// True when the waveguide carries no population; both fractions are then zero.
    pub empty: bool,
}

/// Share of the field population strictly left and right of `pivot`.
pub fn directional_fractions(
    state: &SystemState,
    basis: &Basis,
    chain: &str,
    pivot: f64,
) -> Result<DirectionalFractions> {
    let block = basis
        .chain(chain)
        .ok_or_else(|| Error::config("waveguide", format!("unknown waveguide `{chain}`")))?;
    let (mut left, mut right, mut total) = (0.0, 0.0, 0.0);
    for (i, a) in state.amplitudes[block.range()].iter().enumerate() {
        let p = a.norm_sqr();
        let x = (block.origin + i as i64) as f64;
        total += p;
        if x < pivot {
            left += p;
        } else if x > pivot {
            right += p;
        }
    }
    if total == 0.0 {
        return Ok(DirectionalFractions {
            left: 0.0,
            right: 0.0,
            empty: true,
        });
    }
    Ok(DirectionalFractions {
        left: left / total,
        right: right / total,
        empty: false,
    })
}

/// `rho = v v^dagger` over the listed atoms.
pub fn density_matrix_atoms(state: &SystemState, atoms: &[usize]) -> DMatrix<Complex64> {
    let v: Vec<Complex64> = atoms.iter().map(|&i| state.amplitudes[i]).collect();
    DMatrix::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
}

/// Binary dump: basis hash (u64 LE), time (f64 LE), then re/im f64 LE pairs.
pub fn write_state_dump<W: Write>(mut w: W, basis: &Basis, state: &SystemState) -> std::io::Result<()> {
    w.write_all(&basis.contract_hash().to_le_bytes())?;
    w.write_all(&state.time.to_le_bytes())?;
    for a in &state.amplitudes {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_state_dump<R: Read>(mut r: R, basis: &Basis) -> Result<SystemState> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::StateDump(e.to_string()))?;
    let expected = 16 + 16 * basis.dim();
    if bytes.len() != expected {
        return Err(Error::StateDump(format!(
            "expected {expected} bytes for {} basis states, found {}",
            basis.dim(),
            bytes.len()
        )));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("8 bytes") };
    let hash = u64::from_le_bytes(word(0));
    if hash != basis.contract_hash() {
        return Err(Error::StateDump(format!(
            "basis hash {hash:016x} does not match {:016x}",
            basis.contract_hash()
        )));
    }
    let time = f64::from_le_bytes(word(1));
    let amplitudes = (0..basis.dim())
        .map(|i| {
            Complex64::new(
                f64::from_le_bytes(word(2 + 2 * i)),
                f64::from_le_bytes(word(3 + 2 * i)),
            )
        })
        .collect();
    Ok(SystemState { time, amplitudes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::giant_atom_pair;

    fn giant_atom(n: i64) -> System {
        System {
            chains: vec![ChainSpec::new("w", 21, 1.0)],
            superatoms: vec![SuperatomSpec::single("A", 0.0)],
            couplings: giant_atom_pair("A", 0, "w", 0, n, 0.2, 0.0).to_vec(),
            schedules: vec![],
        }
    }

    #[test]
    fn basis_order_atoms_then_sites() {
        let sys = AssembledSystem::new(giant_atom(4)).unwrap();
        let b = sys.basis();
        assert_eq!(b.dim(), 22);
        assert_eq!(b.atom_index("A", 0), Some(0));
        assert_eq!(b.site_index("w", -10), Some(1));
        assert_eq!(b.site_index("w", 10), Some(21));
        assert_eq!(b.site_index("w", 11), None);
        assert_eq!(b.label(11), "w@0");
    }

    #[test]
    fn atom_row_has_two_chain_entries() {
        let sys = AssembledSystem::new(giant_atom(4)).unwrap();
        let h = sys.assemble(0.0);
        assert_eq!(h.count_in(0, 1..22), 2);
        assert_eq!(h.get(0, 11), Complex64::new(0.2, 0.0));
        assert_eq!(h.get(0, 15), Complex64::new(0.2, 0.0));
        assert!(h.is_hermitian());
    }

    #[test]
    fn chain_only_is_tridiagonal() {
        let sys = AssembledSystem::new(System {
            chains: vec![ChainSpec::new("w", 6, 0.7)],
            ..Default::default()
        })
        .unwrap();
        let h = sys.assemble(0.0).to_dense();
        for r in 0..6 {
            for c in 0..6 {
                let expect = if (r as i64 - c as i64).abs() == 1 { 0.7 } else { 0.0 };
                assert_eq!(h[(r, c)], Complex64::from(expect));
            }
        }
    }

    #[test]
    fn validation_errors_name_the_path() {
        let mut sys = giant_atom(4);
        sys.couplings[1].site = 99;
        match AssembledSystem::new(sys) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "couplings[1].site"),
            other => panic!("unexpected {other:?}"),
        }
        let mut sys = giant_atom(4);
        sys.couplings[1].site = 0;
        assert!(AssembledSystem::new(sys).is_err());
        let mut sys = giant_atom(4);
        sys.couplings[0].schedule = Some("nope".into());
        assert!(AssembledSystem::new(sys).is_err());
    }

    #[test]
    fn zero_hamiltonian_leaves_state_unchanged() {
        let mut sys = giant_atom(4);
        sys.chains[0].hopping = 1e-300;
        sys.couplings.iter_mut().for_each(|p| p.amplitude = 0.0);
        let sys = AssembledSystem::new(sys).unwrap();
        let mut psi = SystemState::zeros(sys.dim(), 0.0);
        psi.amplitudes[0] = Complex64::new(0.6, 0.0);
        psi.amplitudes[5] = Complex64::new(0.0, 0.8);
        let out = sys
            .propagate(&psi, 3.0, &PropagationOptions::default().with_dt(0.1), |_, _| {})
            .unwrap();
        for (a, b) in out.state.amplitudes.iter().zip(&psi.amplitudes) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(out.state.time, 3.0);
    }

    #[test]
    fn samples_land_on_grid() {
        let sys = AssembledSystem::new(giant_atom(2)).unwrap();
        let psi = SystemState::from_pattern(sys.dim(), &[(0, Complex64::from(1.0))], 0.0);
        let mut times = Vec::new();
        sys.propagate(&psi, 1.0, &PropagationOptions::sampled(0.25), |s, _| times.push(s.time))
            .unwrap();
        assert_eq!(times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn observables_on_bell_states() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sym = SystemState::from_pattern(3, &[(0, h.into()), (1, h.into())], 0.0);
        let anti = SystemState::from_pattern(3, &[(0, h.into()), (1, (-h).into())], 0.0);
        assert!((coherence(&sym, 0, 1).re - 0.5).abs() < 1e-15);
        assert!((coherence(&anti, 0, 1).re + 0.5).abs() < 1e-15);
        assert!((fidelity(&sym, &[(0, h.into()), (1, h.into())]) - 1.0).abs() < 1e-15);
        assert!(fidelity(&sym, &[(0, h.into()), (1, (-h).into())]) < 1e-15);
        let rho = density_matrix_atoms(&sym, &[0, 1]);
        assert!(rho.iter().all(|x| (x.re - 0.5).abs() < 1e-15 && x.im == 0.0));
        let single = SystemState::from_pattern(3, &[(2, 1.0.into())], 0.0);
        let rho = density_matrix_atoms(&single, &[0, 1, 2]);
        assert_eq!(rho[(2, 2)], Complex64::from(1.0));
        assert_eq!(rho.iter().filter(|x| x.norm() > 0.0).count(), 1);
    }

    #[test]
    fn empty_field_fractions() {
        let sys = AssembledSystem::new(giant_atom(2)).unwrap();
        let psi = SystemState::from_pattern(sys.dim(), &[(0, 1.0.into())], 0.0);
        let f = directional_fractions(&psi, sys.basis(), "w", 1.0).unwrap();
        assert!(f.empty);
        assert_eq!((f.left, f.right), (0.0, 0.0));
        assert!(field_intensity(&psi, sys.basis(), "w").unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn state_dump_roundtrip_and_hash_check() {
        let sys = AssembledSystem::new(giant_atom(2)).unwrap();
        let mut psi = SystemState::zeros(sys.dim(), 1.25);
        psi.amplitudes[3] = Complex64::new(0.3, -0.4);
        let mut buf = Vec::new();
        write_state_dump(&mut buf, sys.basis(), &psi).unwrap();
        assert_eq!(buf.len(), 16 + 16 * sys.dim());
        assert_eq!(read_state_dump(buf.as_slice(), sys.basis()).unwrap(), psi);
        let other = AssembledSystem::new(giant_atom(4)).unwrap();
        assert_eq!(other.basis().contract_hash(), sys.basis().contract_hash());
        let mut bigger = giant_atom(2);
        bigger.chains[0].num_sites = 23;
        let bigger = AssembledSystem::new(bigger).unwrap();
        let mut buf2 = buf.clone();
        buf2.extend_from_slice(&[0u8; 32]);
        assert!(matches!(
            read_state_dump(buf2.as_slice(), bigger.basis()),
            Err(Error::StateDump(_))
        ));
    }

    #[test]
    fn light_cone_check() {
        let sys = AssembledSystem::new(giant_atom(2)).unwrap();
        assert!(sys.check_light_cone(1.0).is_ok());
        assert!(matches!(sys.check_light_cone(100.0), Err(Error::Physics { .. })));
    }
}
