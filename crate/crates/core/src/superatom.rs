//! Internal structure of giant superatoms and their dressed-mode analytics.
//!
//! A superatom is a small network of two-level atoms with real frequencies
//! and a real symmetric coupling graph. Its single-excitation eigenstates
//! ("dressed modes") each carry their own frequency and therefore their own
//! wavevector in the waveguide, which is what makes interference between
//! coupling points mode-selective.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ChainSpec;
use crate::layout::CouplingPoint;

/// Tolerance for "is a multiple of pi" checks on interference phases.
pub const PHASE_TOLERANCE: f64 = 1e-9;

/// Tolerance on frequency equality for bath-mediated exchange.
pub const RESONANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Single,
    Pair,
    /// Three atoms in a line with equal nearest-neighbor coupling.
    Trimer,
    /// `cells` unit cells ordered `P1, Q1, P2, Q2, ...`; intracell `j1`, intercell `j2`.
    Ssh { cells: usize, j1: f64, j2: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SuperatomDef", into = "SuperatomDef")]
pub struct SuperatomSpec {
    pub id: String,
    /// Atom frequencies (detunings from the reference band center).
    pub frequencies: Vec<f64>,
    /// Symmetric coupling matrix with zero diagonal.
    pub couplings: DMatrix<f64>,
    pub topology: Topology,
}

/// Serialized form: one table per superatom, tagged by `topology`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "kebab-case", deny_unknown_fields)]
enum SuperatomDef {
    Single {
        id: String,
        frequency: f64,
    },
    Pair {
        id: String,
        frequencies: [f64; 2],
        j: f64,
    },
    Trimer {
        id: String,
        frequency: f64,
        j: f64,
    },
    Ssh {
        id: String,
        cells: usize,
        j1: f64,
        j2: f64,
        #[serde(default)]
        frequency: f64,
    },
    Custom {
        id: String,
        frequencies: Vec<f64>,
        couplings: Vec<Vec<f64>>,
    },
}

impl TryFrom<SuperatomDef> for SuperatomSpec {
    type Error = Error;

    fn try_from(def: SuperatomDef) -> Result<Self> {
        let spec = match def {
            SuperatomDef::Single { id, frequency } => SuperatomSpec::single(id, frequency),
            SuperatomDef::Pair { id, frequencies, j } => {
                SuperatomSpec::pair(id, frequencies[0], frequencies[1], j)
            }
            SuperatomDef::Trimer { id, frequency, j } => SuperatomSpec::trimer(id, frequency, j),
            SuperatomDef::Ssh {
                id,
                cells,
                j1,
                j2,
                frequency,
            } => SuperatomSpec::ssh(id, cells, j1, j2, frequency),
            SuperatomDef::Custom {
                id,
                frequencies,
                couplings,
            } => {
                let n = frequencies.len();
                if couplings.len() != n || couplings.iter().any(|row| row.len() != n) {
                    return Err(Error::config(
                        format!("superatoms[{id}].couplings"),
                        format!("coupling matrix must be {n}x{n}"),
                    ));
                }
                let m = DMatrix::from_fn(n, n, |r, c| couplings[r][c]);
                SuperatomSpec::custom(id, frequencies, m)
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<SuperatomSpec> for SuperatomDef {
    fn from(s: SuperatomSpec) -> Self {
        match s.topology {
            Topology::Single => SuperatomDef::Single {
                id: s.id,
                frequency: s.frequencies[0],
            },
            Topology::Pair => SuperatomDef::Pair {
                j: s.couplings[(0, 1)],
                frequencies: [s.frequencies[0], s.frequencies[1]],
                id: s.id,
            },
            Topology::Trimer => SuperatomDef::Trimer {
                j: s.couplings[(0, 1)],
                frequency: s.frequencies[0],
                id: s.id,
            },
            Topology::Ssh { cells, j1, j2 } => SuperatomDef::Ssh {
                frequency: s.frequencies[0],
                id: s.id,
                cells,
                j1,
                j2,
            },
            Topology::Custom => {
                let n = s.frequencies.len();
                SuperatomDef::Custom {
                    couplings: (0..n)
                        .map(|r| (0..n).map(|c| s.couplings[(r, c)]).collect())
                        .collect(),
                    frequencies: s.frequencies,
                    id: s.id,
                }
            }
        }
    }
}

impl SuperatomSpec {
    pub fn single(id: impl Into<String>, frequency: f64) -> Self {
        SuperatomSpec {
            id: id.into(),
            frequencies: vec![frequency],
            couplings: DMatrix::zeros(1, 1),
            topology: Topology::Single,
        }
    }

    pub fn pair(id: impl Into<String>, omega1: f64, omega2: f64, j: f64) -> Self {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = j;
        m[(1, 0)] = j;
        SuperatomSpec {
            id: id.into(),
            frequencies: vec![omega1, omega2],
            couplings: m,
            topology: Topology::Pair,
        }
    }

    pub fn trimer(id: impl Into<String>, frequency: f64, j: f64) -> Self {
        let mut m = DMatrix::zeros(3, 3);
        for (a, b) in [(0, 1), (1, 2)] {
            m[(a, b)] = j;
            m[(b, a)] = j;
        }
        SuperatomSpec {
            id: id.into(),
            frequencies: vec![frequency; 3],
            couplings: m,
            topology: Topology::Trimer,
        }
    }

    pub fn ssh(id: impl Into<String>, cells: usize, j1: f64, j2: f64, frequency: f64) -> Self {
        let n = 2 * cells;
        let mut m = DMatrix::zeros(n, n);
        for l in 0..cells {
            let (p, q) = (2 * l, 2 * l + 1);
            m[(p, q)] = j1;
            m[(q, p)] = j1;
            if l + 1 < cells {
                m[(q, p + 2)] = j2;
                m[(p + 2, q)] = j2;
            }
        }
        SuperatomSpec {
            id: id.into(),
            frequencies: vec![frequency; n],
            couplings: m,
            topology: Topology::Ssh { cells, j1, j2 },
        }
    }

    pub fn custom(id: impl Into<String>, frequencies: Vec<f64>, couplings: DMatrix<f64>) -> Self {
        SuperatomSpec {
            id: id.into(),
            frequencies,
            couplings,
            topology: Topology::Custom,
        }
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let path = format!("superatoms[{}]", self.id);
        let n = self.frequencies.len();
        if self.id.is_empty() {
            return Err(Error::config("superatoms[].id", "superatom id must not be empty"));
        }
        if n == 0 {
            return Err(Error::config(format!("{path}.frequencies"), "need at least one atom"));
        }
        if self.couplings.shape() != (n, n) {
            return Err(Error::config(
                format!("{path}.couplings"),
                format!("coupling matrix must be {n}x{n}"),
            ));
        }
        if self.frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::config(format!("{path}.frequencies"), "must be finite"));
        }
        for r in 0..n {
            if self.couplings[(r, r)] != 0.0 {
                return Err(Error::config(
                    format!("{path}.couplings[{r}][{r}]"),
                    "diagonal must be zero; on-site energies belong in frequencies",
                ));
            }
            for c in 0..r {
                let (a, b) = (self.couplings[(r, c)], self.couplings[(c, r)]);
                if !a.is_finite() || a != b {
                    return Err(Error::config(
                        format!("{path}.couplings[{r}][{c}]"),
                        "coupling matrix must be finite and symmetric",
                    ));
                }
            }
        }
        if let Topology::Ssh { cells, .. } = self.topology {
            if cells == 0 || n != 2 * cells {
                return Err(Error::config(format!("{path}.cells"), "SSH chain needs 2 atoms per cell"));
            }
        }
        Ok(())
    }

    /// Single-excitation Hamiltonian of the isolated superatom.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let mut h = self.couplings.clone();
        for (i, w) in self.frequencies.iter().enumerate() {
            h[(i, i)] = *w;
        }
        h
    }

    /// Largest coupling magnitude (at least 1, used to scale tolerances).
    pub fn coupling_scale(&self) -> f64 {
        self.couplings.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeTag {
    LeftEdge,
    RightEdge,
}

/// Eigenstate of an isolated superatom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressedMode {
    pub index: usize,
    pub frequency: f64,
    /// Real unit-norm amplitudes over the superatom's atoms.
    pub vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<EdgeTag>,
}

impl DressedMode {
    /// Amplitude `s` of the mode on one atom.
    pub fn overlap(&self, atom: usize) -> f64 {
        self.vector.get(atom).copied().unwrap_or(0.0)
    }
}

/// Flip `v` so that its first non-negligible component is positive.
fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Exact diagonalization, eigenvalues ascending.
pub fn dressed_modes(gsa: &SuperatomSpec) -> Vec<DressedMode> {
    let n = gsa.len();
    let eig = SymmetricEigen::new(gsa.hamiltonian());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .enumerate()
        .map(|(index, col)| {
            let mut vector: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
            fix_sign(&mut vector);
            DressedMode {
                index,
                frequency: eig.eigenvalues[col],
                vector,
                tag: None,
            }
        })
        .collect()
}

/// Mixing angle with `tan(2 theta) = 2J / (omega1 - omega2)`; the upper dressed
/// state of a pair is `(cos theta, sin theta)`.
pub fn mixing_angle(omega1: f64, omega2: f64, j: f64) -> Result<f64> {
    if j == 0.0 && omega1 == omega2 {
        return Err(Error::Degenerate);
    }
    Ok(0.5 * (2.0 * j).atan2(omega1 - omega2))
}

/// Raw and `[0, 2 pi)`-wrapped propagation phase between two coupling points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAccumulation {
    pub raw: f64,
    pub wrapped: f64,
}

pub fn phase_accumulation(
    frequency: f64,
    chain: &ChainSpec,
    separation: i64,
) -> Result<PhaseAccumulation> {
    let raw = chain.wavevector_of(frequency)? * separation as f64;
    Ok(PhaseAccumulation {
        raw,
        wrapped: raw.rem_euclid(2.0 * PI),
    })
}

/// Far-field emission amplitudes of a mode into the two propagation directions.
///
/// Magnitudes are what matter: `right = |sum_j g_j s_j e^{-i k x_j}|`,
/// `left = |sum_j g_j s_j e^{+i k x_j}|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionAmplitudes {
    pub wavevector: f64,
    pub left: Complex64,
    pub right: Complex64,
}

pub fn emission_amplitudes(
    mode: &DressedMode,
    chain: &ChainSpec,
    points: &[CouplingPoint],
) -> Result<EmissionAmplitudes> {
    let k = chain.wavevector_of(mode.frequency)?;
    let mut left = Complex64::new(0.0, 0.0);
    let mut right = Complex64::new(0.0, 0.0);
    for p in points.iter().filter(|p| p.waveguide == chain.id) {
        let a = p.coefficient() * mode.overlap(p.atom);
        let x = p.site as f64;
        left += a * Complex64::from_polar(1.0, k * x);
        right += a * Complex64::from_polar(1.0, -k * x);
    }
    Ok(EmissionAmplitudes {
        wavevector: k,
        left,
        right,
    })
}

/// Markovian decay rate of a dressed mode into one waveguide,
/// `pi D(omega) (|A_left|^2 + |A_right|^2)`.
///
/// For real amplitudes both directions carry the same weight and this equals
/// `2 pi D |sum_j g_j s_j e^{i k x_j}|^2`; two equal couplings `g0` at
/// separation `N` give `4 pi D g0^2 [1 + cos(kN)] |s|^2`.
pub fn effective_decay(
    mode: &DressedMode,
    chain: &ChainSpec,
    points: &[CouplingPoint],
) -> Result<f64> {
    let dos = chain.density_of_states(mode.frequency)?;
    let amp = emission_amplitudes(mode, chain, points)?;
    Ok(PI * dos * (amp.left.norm_sqr() + amp.right.norm_sqr()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chirality {
    Left,
    Right,
    /// Dark: no emission in either direction.
    None,
    Mixed,
}

fn is_odd_multiple_of_pi(x: f64) -> bool {
    let r = (x - PI).rem_euclid(2.0 * PI);
    r.min(2.0 * PI - r) <= PHASE_TOLERANCE
}

/// Emission direction of a mode from a two-point coupling `(g, g e^{i phi})`
/// at separation `N`, phase on the rightmost point.
///
/// Right-going emission cancels when `phi - phi_nu` is an odd multiple of pi,
/// left-going when `phi + phi_nu` is. The direction labels were checked
/// against full simulations of the field intensity.
pub fn predict_chirality(
    mode: &DressedMode,
    chain: &ChainSpec,
    phase_diff: f64,
    separation: i64,
) -> Result<Chirality> {
    let phi_nu = phase_accumulation(mode.frequency, chain, separation)?.raw;
    let right_dark = is_odd_multiple_of_pi(phase_diff - phi_nu);
    let left_dark = is_odd_multiple_of_pi(phase_diff + phi_nu);
    Ok(match (left_dark, right_dark) {
        (true, true) => Chirality::None,
        (true, false) => Chirality::Right,
        (false, true) => Chirality::Left,
        (false, false) => Chirality::Mixed,
    })
}

/// Left/right edge modes of a topological SSH superatom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStates {
    pub left: DressedMode,
    pub right: DressedMode,
    /// The two eigenvalues closest to the on-site energy (finite-size split pair).
    pub hybridized: [f64; 2],
}

/// Sublattice-resolved edge modes.
///
/// The two near-zero eigenvectors of a finite chain are hybridized mixtures of
/// the edge modes; projecting their span onto the `P` (`Q`) sublattice
/// recovers the left (right) edge mode.
pub fn ssh_edge_states(gsa: &SuperatomSpec) -> Result<EdgeStates> {
    let Topology::Ssh { cells, j1, j2 } = gsa.topology else {
        return Err(Error::config(
            format!("superatoms[{}].topology", gsa.id),
            "edge states need an SSH superatom",
        ));
    };
    if j1.abs() >= j2.abs() {
        return Err(Error::NotTopological { j1, j2 });
    }
    if cells < 2 {
        return Err(Error::config(
            format!("superatoms[{}].cells", gsa.id),
            "edge states need at least 2 cells",
        ));
    }
    let onsite = gsa.frequencies[0];
    let modes = dressed_modes(gsa);
    let mut by_energy: Vec<&DressedMode> = modes.iter().collect();
    by_energy.sort_by(|a, b| {
        (a.frequency - onsite)
            .abs()
            .total_cmp(&(b.frequency - onsite).abs())
    });
    let pair = [by_energy[0], by_energy[1]];

    let project = |parity: usize, tag: EdgeTag, index: usize| {
        let candidates = pair.map(|m| {
            m.vector
                .iter()
                .enumerate()
                .map(|(i, x)| if i % 2 == parity { *x } else { 0.0 })
                .collect::<Vec<f64>>()
        });
        let norm = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let best = if norm(&candidates[0]) >= norm(&candidates[1]) {
            &candidates[0]
        } else {
            &candidates[1]
        };
        let n = norm(best);
        let mut vector: Vec<f64> = best.iter().map(|x| x / n).collect();
        fix_sign(&mut vector);
        let h = gsa.hamiltonian();
        let frequency = (0..vector.len())
            .flat_map(|r| (0..vector.len()).map(move |c| (r, c)))
            .map(|(r, c)| vector[r] * h[(r, c)] * vector[c])
            .sum();
        DressedMode {
            index,
            frequency,
            vector,
            tag: Some(tag),
        }
    };

    let mut idx = [pair[0].index, pair[1].index];
    idx.sort_unstable();
    Ok(EdgeStates {
        left: project(0, EdgeTag::LeftEdge, idx[0]),
        right: project(1, EdgeTag::RightEdge, idx[1]),
        hybridized: [pair[0].frequency, pair[1].frequency],
    })
}

/// Bath-mediated coupling between two resonant dressed modes,
/// `sum_{i in A, j in B} g_i s_A conj(g_j s_B) G0(omega, x_i - x_j)`.
///
/// The real part is the coherent exchange rate, the imaginary part the
/// collective dissipation. With `A == B` this is the mode's self-energy and
/// its imaginary part equals `-effective_decay / 2`.
pub fn effective_unit_coupling(
    mode_a: &DressedMode,
    points_a: &[CouplingPoint],
    mode_b: &DressedMode,
    points_b: &[CouplingPoint],
    chain: &ChainSpec,
) -> Result<Complex64> {
    if (mode_a.frequency - mode_b.frequency).abs() > RESONANCE_TOLERANCE {
        return Err(Error::NotResonant {
            freq_a: mode_a.frequency,
            freq_b: mode_b.frequency,
        });
    }
    let omega = mode_a.frequency;
    chain.wavevector_of(omega)?;
    let on_chain = |p: &&CouplingPoint| p.waveguide == chain.id;
    let mut total = Complex64::new(0.0, 0.0);
    for pa in points_a.iter().filter(on_chain) {
        let a = pa.coefficient() * mode_a.overlap(pa.atom);
        for pb in points_b.iter().filter(on_chain) {
            let b = pb.coefficient() * mode_b.overlap(pb.atom);
            total += a * b.conj() * chain.retarded_greens_function(omega, pa.site - pb.site)?;
        }
    }
    Ok(total)
}
