//! Independent numerical oracles for the lattice and the propagator.

mod common;

use common::*;
use gsa_core::dynamics::{AssembledSystem, PropagationOptions, System, SystemState, DT_FACTOR};
use gsa_core::lattice::ChainSpec;
use gsa_core::layout::{giant_atom_pair, CouplingPoint, Schedule};
use gsa_core::superatom::SuperatomSpec;
use gsa_core::Execution;
use num_complex::Complex64;

#[test]
fn greens_function_matches_matrix_inversion() {
    let xi = 1.0;
    let chain = ChainSpec::new("w", 3, xi);
    for omega in [0.0, 0.7, -1.2, 2.0_f64.sqrt(), 1.9] {
        for d in [0usize, 1, 2, 3, 4, 7, 10] {
            let oracle = resolvent_oracle(xi, omega, d);
            let g = chain.retarded_greens_function(omega, d as i64).unwrap();
            assert!(
                (g - oracle).norm() <= 1e-3 / xi,
                "omega {omega} d {d}: {g} vs {oracle}"
            );
        }
    }
}

#[test]
fn assembled_hamiltonian_matches_reference_exactly() {
    for phase in [0.0, 0.5 * std::f64::consts::PI, 2.3] {
        let sys = AssembledSystem::new(small_system(phase)).unwrap();
        let h = sys.assemble(0.0);
        assert!(h.is_hermitian());
        assert_eq!(h.to_dense(), reference_hamiltonian(phase));
    }
}

#[test]
fn propagation_matches_dense_exponential() {
    let phase = 0.5 * std::f64::consts::PI;
    let sys = AssembledSystem::new(small_system(phase)).unwrap();
    assert!(sys.dim() <= 300);
    let psi = initial(sys.dim());
    let t = 12.0;
    let out = sys
        .propagate(&psi, t, &PropagationOptions::default().with_dt(0.002), |_, _| {})
        .unwrap();
    let exact = exact_evolution(&reference_hamiltonian(phase), &psi.amplitudes, t);
    let err = max_diff(&out.state.amplitudes, &exact);
    assert!(err <= 1e-8, "max deviation {err:e}");
}

#[test]
fn fourth_order_convergence() {
    let phase = 1.0;
    let sys = AssembledSystem::new(small_system(phase)).unwrap();
    let psi = initial(sys.dim());
    let t = 5.0;
    let exact = exact_evolution(&reference_hamiltonian(phase), &psi.amplitudes, t);
    let err = |dt: f64| {
        let out = sys
            .propagate(&psi, t, &PropagationOptions::default().with_dt(dt), |_, _| {})
            .unwrap();
        max_diff(&out.state.amplitudes, &exact)
    };
    let (e1, e2, e3) = (err(0.04), err(0.02), err(0.01));
    let p1 = (e1 / e2).log2();
    let p2 = (e2 / e3).log2();
    assert!((p1 - 4.0).abs() < 0.3 && (p2 - 4.0).abs() < 0.3, "orders {p1} {p2}");
}

#[test]
fn norm_drift_and_energy_at_default_step() {
    let xi = 1.0;
    let mut system = small_system(0.4);
    system.chains = vec![ChainSpec::new("w", 500, xi)];
    let sys = AssembledSystem::new(system).unwrap();
    let dt = sys.default_dt();
    assert!(dt <= DT_FACTOR);
    let psi = initial(sys.dim());
    let e0 = sys.expectation(&psi);
    let t = 100.0;
    let mut worst = 0.0f64;
    let mut energy = 0.0f64;
    sys.propagate(&psi, t, &PropagationOptions::sampled(1.0), |s, _| {
        worst = worst.max((s.norm() - 1.0).abs() / s.time.max(1.0));
        energy = energy.max((sys.expectation(s) - e0).norm() / s.time.max(1.0));
    })
    .unwrap();
    assert!(worst <= 1e-9, "norm drift per unit time {worst:e}");
    assert!(energy <= 1e-9, "energy drift per unit time {energy:e}");
}

#[test]
fn absorbing_layers_remove_a_wavepacket() {
    let xi = 1.0;
    let chain = ChainSpec::new("w", 800, xi).with_absorbing(150, None);
    let sys = AssembledSystem::new(System {
        chains: vec![chain.clone()],
        ..Default::default()
    })
    .unwrap();
    // right-moving gaussian at k = pi/2, width 20 sites, started at the center
    let k = std::f64::consts::FRAC_PI_2;
    let sigma = 20.0;
    let mut psi = SystemState::zeros(sys.dim(), 0.0);
    for (i, a) in psi.amplitudes.iter_mut().enumerate() {
        let x = chain.logical_site(i) as f64;
        // phase e^{-ikx} travels right for this dispersion
        *a = Complex64::from_polar((-(x * x) / (4.0 * sigma * sigma)).exp(), -k * x);
    }
    let n = psi.norm();
    psi.amplitudes.iter_mut().for_each(|a| *a /= n);
    // center to far absorber edge is 400 sites at speed 2 xi, plus margin
    let out = sys
        .propagate(&psi, 300.0 / xi, &PropagationOptions::default(), |_, _| {})
        .unwrap();
    let reflected = out.state.norm_sqr();
    let absorbed = out.absorbed[0].left + out.absorbed[0].right;
    assert!(reflected < 1e-4, "left in the chain: {reflected:e}");
    assert!((absorbed + reflected - 1.0).abs() < 1e-6);
    assert!(out.absorbed[0].right > 0.999);
}

#[test]
fn parallel_and_sequential_agree_bit_for_bit() {
    let chain = ChainSpec::new("w", 30_001, 12.5).with_absorbing(200, None);
    let emit = Schedule::emit("e", 1.0, 0.045, 0.0);
    let absorb = Schedule::absorb_partner(&emit, "a", 5.0);
    let mut couplings: Vec<CouplingPoint> = giant_atom_pair("A", 0, "w", 0, 2, 1.0, 1.2)
        .into_iter()
        .map(|p| p.with_schedule("e"))
        .collect();
    couplings.extend(
        giant_atom_pair("B", 0, "w", 70, 2, 1.0, 1.2)
            .into_iter()
            .map(|p| p.with_schedule("a")),
    );
    let sys = AssembledSystem::new(System {
        chains: vec![chain],
        superatoms: vec![
            SuperatomSpec::pair("A", 0.0, 0.0, 17.0),
            SuperatomSpec::pair("B", 0.0, 0.0, 17.0),
        ],
        couplings,
        schedules: vec![emit, absorb],
    })
    .unwrap();
    let psi = initial(sys.dim());
    let run = |execution| {
        let opts = PropagationOptions::sampled(0.5).with_execution(execution);
        let mut trace = Vec::new();
        let out = sys
            .propagate(&psi, 2.0, &opts, |s, ab| trace.push((s.amplitudes[0], ab[0].right)))
            .unwrap();
        (out.state.amplitudes, trace)
    };
    let (a, ta) = run(Execution::Sequential);
    let (b, tb) = run(Execution::Parallel);
    assert_eq!(a, b);
    assert_eq!(ta, tb);
}
