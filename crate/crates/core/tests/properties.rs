use std::f64::consts::PI;

use gsa_core::config::RunConfig;
use gsa_core::dynamics::{
    read_state_dump, write_state_dump, AssembledSystem, PropagationOptions, System, SystemState,
};
use gsa_core::lattice::ChainSpec;
use gsa_core::layout::{giant_atom_pair, CouplingPoint, Schedule};
use gsa_core::scenarios::{S4Params, Scenario};
use gsa_core::superatom::{dressed_modes, effective_decay, phase_accumulation, SuperatomSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn coupling() -> impl Strategy<Value = (usize, i64, f64, f64)> {
    (0usize..2, -10i64..10, 0.1f64..2.0, -PI..PI)
}

fn random_system(
    j: f64,
    w: [f64; 2],
    mut points: Vec<(usize, i64, f64, f64)>,
) -> System {
    // one coupling per (atom, site)
    points.sort_by_key(|p| (p.0, p.1));
    points.dedup_by_key(|p| (p.0, p.1));
    System {
        chains: vec![ChainSpec::new("w", 40, 1.0)],
        superatoms: vec![SuperatomSpec::pair("A", w[0], w[1], j)],
        couplings: points
            .into_iter()
            .map(|(atom, site, g, phi)| CouplingPoint::new("A", atom, "w", site, g).with_phase(phi))
            .collect(),
        schedules: vec![],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_exactly_hermitian(
        j in -3.0f64..3.0,
        w in prop::array::uniform2(-2.0f64..2.0),
        points in prop::collection::vec(coupling(), 1..6),
    ) {
        let sys = AssembledSystem::new(random_system(j, w, points)).unwrap();
        let h = sys.assemble(0.0);
        prop_assert!(h.is_hermitian());
        let d = h.to_dense();
        prop_assert_eq!(d.adjoint(), d);
    }

    #[test]
    fn norm_is_conserved(
        j in -3.0f64..3.0,
        w in prop::array::uniform2(-2.0f64..2.0),
        points in prop::collection::vec(coupling(), 1..4),
        t in 0.5f64..5.0,
    ) {
        let sys = AssembledSystem::new(random_system(j, w, points)).unwrap();
        let psi = SystemState::from_pattern(sys.dim(), &[(0, Complex64::from(1.0))], 0.0);
        let out = sys.propagate(&psi, t, &PropagationOptions::default(), |_, _| {}).unwrap();
        prop_assert!((out.state.norm() - 1.0).abs() <= 1e-9 * t, "{:e} dt {}", out.state.norm() - 1.0, out.dt);
    }

    #[test]
    fn dressed_modes_are_orthonormal(
        n in 1usize..7,
        seed in prop::collection::vec(-2.0f64..2.0, 49),
    ) {
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in r + 1..n {
                m[(r, c)] = seed[r * 7 + c];
                m[(c, r)] = seed[r * 7 + c];
            }
        }
        let freqs = (0..n).map(|i| seed[i * 8]).collect();
        let modes = dressed_modes(&SuperatomSpec::custom("X", freqs, m));
        for a in &modes {
            for b in &modes {
                let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
                let want = if a.index == b.index { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-12, "{dot}");
            }
        }
        for w in modes.windows(2) {
            prop_assert!(w[0].frequency <= w[1].frequency);
        }
    }

    /// Two equal coupling points: the decay is four times the single-point
    /// rate `pi D g^2` times `(1 + cos phi_nu)`, weighted by the atom overlap.
    #[test]
    fn decay_reduces_to_two_point_interference(
        omega in -1.9f64..1.9,
        xi in 0.5f64..20.0,
        sep in 1i64..12,
        g in 0.1f64..2.0,
        j in 0.1f64..3.0,
    ) {
        let chain = ChainSpec::new("w", 3, xi);
        let gsa = SuperatomSpec::pair("A", omega * xi - j, omega * xi - j, j);
        let modes = dressed_modes(&gsa);
        let points = giant_atom_pair("A", 0, "w", 0, sep, g, 0.0);
        for m in &modes {
            let Ok(dos) = chain.density_of_states(m.frequency) else { continue };
            let phi = phase_accumulation(m.frequency, &chain, sep).unwrap().raw;
            let s = m.overlap(0);
            let closed = 4.0 * PI * dos * g * g * (1.0 + phi.cos()) * s * s;
            let gamma = effective_decay(m, &chain, &points).unwrap();
            prop_assert!((gamma - closed).abs() <= 1e-12 * closed.max(1.0), "{gamma} vs {closed}");
        }
    }

    #[test]
    fn phase_wraps_into_one_turn(omega in -1.99f64..1.99, sep in 0i64..500) {
        let chain = ChainSpec::new("w", 3, 1.0);
        let p = phase_accumulation(omega, &chain, sep).unwrap();
        prop_assert!((0.0..2.0 * PI).contains(&p.wrapped));
        let turns = (p.raw - p.wrapped) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    /// `g_B(t) = g_A(tau - t)` for an emitter ramp ending at `t = 0`.
    #[test]
    fn receiver_envelope_is_time_reversed_emitter(
        beta in 0.01f64..1.0,
        tau in 0.0f64..20.0,
        t in -200.0f64..200.0,
    ) {
        let emit = Schedule::emit("e", 1.0, beta, 0.0);
        let absorb = Schedule::absorb_partner(&emit, "a", tau);
        prop_assert!((absorb.value(t) - emit.value(tau - t)).abs() <= 1e-15);
    }

    /// Shifting both ramps only costs rounding in the time arguments.
    #[test]
    fn shifted_ramps_stay_mirrored(
        beta in 0.01f64..1.0,
        t_ref in -50.0f64..50.0,
        tau in 0.0f64..20.0,
        u in -200.0f64..200.0,
    ) {
        let emit = Schedule::emit("e", 1.0, beta, t_ref);
        let absorb = Schedule::absorb_partner(&emit, "a", tau);
        let mid = t_ref + 0.5 * tau;
        prop_assert!((emit.value(mid - u) - absorb.value(mid + u)).abs() <= 1e-12);
    }

    #[test]
    fn config_roundtrip_is_a_fixed_point(
        beta in 0.01f64..0.2,
        phase in -PI..PI,
        receiver in 20i64..200,
        dt in prop::option::of(0.001f64..0.01),
    ) {
        let mut cfg = RunConfig::new(Scenario::S4(S4Params {
            beta,
            phase,
            receiver_left: receiver,
            ..Default::default()
        }));
        cfg.integration.dt = dt;
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn state_dump_roundtrip(re in prop::collection::vec(-1.0f64..1.0, 42), t in -10.0f64..10.0) {
        let sys = AssembledSystem::new(random_system(1.0, [0.0, 0.0], vec![(0, 0, 1.0, 0.0)])).unwrap();
        let state = SystemState {
            time: t,
            amplitudes: re.iter().map(|x| Complex64::new(*x, -x / 3.0)).collect(),
        };
        let mut buf = Vec::new();
        write_state_dump(&mut buf, sys.basis(), &state).unwrap();
        let back = read_state_dump(&buf[..], sys.basis()).unwrap();
        prop_assert_eq!(back, state);
    }
}
