//! Reference implementations shared by the integration tests.

#![allow(dead_code)]

use gsa_core::dynamics::{System, SystemState};
use gsa_core::lattice::ChainSpec;
use gsa_core::layout::{giant_atom_pair, CouplingPoint};
use gsa_core::superatom::SuperatomSpec;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Solve `(z - H) x = e_src` for a uniform chain with hopping `t` by the
/// Thomas algorithm, returning `x[src + d]`.
pub fn chain_resolvent(n: usize, t: f64, z: Complex64, src: usize, d: usize) -> Complex64 {
    let a = -Complex64::from(t);
    let mut cp = vec![ZERO; n];
    let mut dp = vec![ZERO; n];
    for i in 0..n {
        let rhs = if i == src { Complex64::from(1.0) } else { ZERO };
        if i == 0 {
            cp[0] = a / z;
            dp[0] = rhs / z;
        } else {
            let m = z - a * cp[i - 1];
            cp[i] = a / m;
            dp[i] = (rhs - a * dp[i - 1]) / m;
        }
    }
    let mut x = vec![ZERO; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x[src + d]
}

/// Cubic extrapolation to `eta -> 0` from four equally spaced samples.
pub fn extrapolate(samples: [Complex64; 4]) -> Complex64 {
    // Lagrange weights at eta = 0 for nodes 1, 2, 3, 4 (in units of the spacing)
    samples[0] * 4.0 - samples[1] * 6.0 + samples[2] * 4.0 - samples[3]
}

/// Hermitian test system: 60-site hard-wall chain, a pair superatom with a
/// chiral coupling and a single atom, 63 states.
pub fn small_system(phase: f64) -> System {
    let mut couplings = giant_atom_pair("A", 0, "w", -3, 2, 0.7, phase).to_vec();
    couplings.push(CouplingPoint::new("B", 0, "w", 5, 0.4));
    couplings.push(CouplingPoint::new("B", 0, "w", 9, 0.4).with_phase(-1.1));
    System {
        chains: vec![ChainSpec::new("w", 60, 1.0)],
        superatoms: vec![
            SuperatomSpec::pair("A", 0.3, -0.2, 0.9),
            SuperatomSpec::single("B", 0.5),
        ],
        couplings,
        schedules: vec![],
    }
}

/// The Hamiltonian written out element by element, without the library.
pub fn reference_hamiltonian(phase: f64) -> DMatrix<Complex64> {
    let dim = 63;
    let mut h = DMatrix::from_element(dim, dim, ZERO);
    h[(0, 0)] = Complex64::from(0.3);
    h[(1, 1)] = Complex64::from(-0.2);
    h[(0, 1)] = Complex64::from(0.9);
    h[(1, 0)] = Complex64::from(0.9);
    h[(2, 2)] = Complex64::from(0.5);
    // chain origin is -30, so site n sits at 3 + n + 30
    let site = |n: i64| (3 + n + 30) as usize;
    for i in 3..dim - 1 {
        h[(i, i + 1)] = Complex64::from(1.0);
        h[(i + 1, i)] = Complex64::from(1.0);
    }
    let mut couple = |atom: usize, n: i64, g: Complex64| {
        h[(atom, site(n))] += g;
        h[(site(n), atom)] += g.conj();
    };
    couple(0, -3, Complex64::from(0.7));
    couple(0, -1, Complex64::from_polar(0.7, phase));
    couple(2, 5, Complex64::from(0.4));
    couple(2, 9, Complex64::from_polar(0.4, -1.1));
    h
}

pub fn exact_evolution(h: &DMatrix<Complex64>, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let x = nalgebra::DVector::from_column_slice(psi);
    let mut c = v.adjoint() * x;
    for (ci, e) in c.iter_mut().zip(eig.eigenvalues.iter()) {
        *ci *= Complex64::from_polar(1.0, -e * t);
    }
    (v * c).iter().copied().collect()
}

pub fn initial(dim: usize) -> SystemState {
    let s = 0.5f64.sqrt();
    SystemState::from_pattern(
        dim,
        &[(0, Complex64::new(s, 0.0)), (1, Complex64::new(0.0, s))],
        0.0,
    )
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}


/// Four-point eta ladder for the chain resolvent, extrapolated to zero.
pub fn resolvent_oracle(xi: f64, omega: f64, d: usize) -> Complex64 {
    let n = 24_001;
    let step = 0.005 * xi;
    extrapolate([1.0, 2.0, 3.0, 4.0].map(|m| chain_resolvent(n, xi, Complex64::new(omega, m * step), n / 2, d)))
}
