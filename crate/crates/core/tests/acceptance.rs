//! Acceptance gate: one PASS/FAIL line per criterion, then a single assertion.

mod common;

use std::f64::consts::PI;

use common::*;
use gsa_core::dynamics::{AssembledSystem, PropagationOptions};
use gsa_core::lattice::ChainSpec;
use gsa_core::layout::{giant_atom_pair, Schedule};
use gsa_core::scenarios::{Overrides, S1Params, S2Params, S6Params, Scenario};
use gsa_core::superatom::{
    dressed_modes, effective_decay, effective_unit_coupling, phase_accumulation, SuperatomSpec,
};
use gsa_core::{run_batch, RunOptions, ScenarioReport};
use nalgebra::DMatrix;

struct Outcome {
    label: &'static str,
    checks: Vec<(String, bool)>,
}

impl Outcome {
    fn new(label: &'static str) -> Self {
        Outcome { label, checks: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn criteria(&mut self, r: &ScenarioReport, names: &[&str]) {
        for n in names {
            match r.criterion(n) {
                Some(c) => self.check(format!("{} {c}", r.scenario), c.passed),
                None => self.check(format!("{} {n} missing", r.scenario), false),
            }
        }
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

fn reports() -> Vec<ScenarioReport> {
    let mut batch: Vec<Scenario> = ["s1", "s2"]
        .iter()
        .map(|id| Scenario::defaults(id).unwrap())
        .collect();
    batch.push(Scenario::S1(S1Params {
        separation: 2,
        control: false,
        ..Default::default()
    }));
    batch.push(Scenario::S2(S2Params {
        detuning_over_j: 2.0,
        ..Default::default()
    }));
    batch.extend(["s3", "s4", "s5", "s6", "s7"].iter().map(|id| Scenario::defaults(id).unwrap()));
    run_batch(&batch, &RunOptions::default())
        .into_iter()
        .map(|r| r.unwrap())
        .collect()
}

fn braided_coupling(out: &mut Outcome) {
    let p = S2Params::default();
    let chain = ChainSpec::new("w", 3, p.hopping);
    let j = p.j_over_xi * p.hopping;
    let mode_a = dressed_modes(&SuperatomSpec::pair("A", 0.0, 0.0, j)).remove(1);
    let mode_b = dressed_modes(&SuperatomSpec::pair("B", 0.0, 0.0, j)).remove(1);
    let pa = giant_atom_pair("A", 0, "w", p.points_a[0], p.points_a[1] - p.points_a[0], p.g0, 0.0);
    let pb = giant_atom_pair("B", 0, "w", p.points_b[0], p.points_b[1] - p.points_b[0], p.g0, 0.0);
    let c = effective_unit_coupling(&mode_a, &pa, &mode_b, &pb, &chain).unwrap();
    let closed = p.g0 * p.g0 / (2.0 * p.hopping);
    let rel = (c.re.abs() - closed).abs() / closed;
    out.check(
        format!("effective coupling {:.9} vs closed form magnitude {closed:.9} (relative {rel:.1e})", c.re),
        rel <= 1e-6,
    );
}

fn property_suite(out: &mut Outcome) {
    let phase = 0.5 * PI;
    let sys = AssembledSystem::new(small_system(phase)).unwrap();
    let h = sys.assemble(0.0);
    let dense = h.to_dense();
    out.check("hermiticity exact", h.is_hermitian() && dense.adjoint() == dense);
    out.check("assembly matches reference", dense == reference_hamiltonian(phase));

    let psi = initial(sys.dim());
    let t = 50.0;
    let mut drift = 0.0f64;
    sys.propagate(&psi, t, &PropagationOptions::sampled(1.0), |s, _| {
        drift = drift.max((s.norm() - 1.0).abs() / s.time.max(1.0));
    })
    .unwrap();
    out.check(format!("norm drift {drift:.1e} per unit time <= 1e-9"), drift <= 1e-9);

    let exact = exact_evolution(&dense, &psi.amplitudes, 12.0);
    let run = |dt: f64, t: f64| {
        sys.propagate(&psi, t, &PropagationOptions::default().with_dt(dt), |_, _| {})
            .unwrap()
            .state
            .amplitudes
    };
    let err = max_diff(&run(0.002, 12.0), &exact);
    out.check(format!("dense oracle deviation {err:.1e} <= 1e-8 on {} states", sys.dim()), err <= 1e-8);

    let exact5 = exact_evolution(&dense, &psi.amplitudes, 5.0);
    let e: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|dt| max_diff(&run(*dt, 5.0), &exact5)).collect();
    let (p1, p2) = ((e[0] / e[1]).log2(), (e[1] / e[2]).log2());
    out.check(
        format!("convergence orders {p1:.2} {p2:.2}"),
        (p1 - 4.0).abs() < 0.3 && (p2 - 4.0).abs() < 0.3,
    );

    let mut worst = 0.0f64;
    for (omega, xi, sep, g, j) in [(0.3, 1.0, 3, 0.5, 0.7), (-1.1, 7.5, 8, 1.2, 2.0), (1.6, 15.0, 2, 1.0, 0.2)] {
        let chain = ChainSpec::new("w", 3, xi);
        let gsa = SuperatomSpec::pair("A", omega * xi - j, omega * xi - j, j);
        let points = giant_atom_pair("A", 0, "w", 0, sep, g, 0.0);
        for m in dressed_modes(&gsa) {
            let Ok(dos) = chain.density_of_states(m.frequency) else { continue };
            let phi = phase_accumulation(m.frequency, &chain, sep).unwrap().raw;
            let s = m.overlap(0);
            let closed = 4.0 * PI * dos * g * g * (1.0 + phi.cos()) * s * s;
            let gamma = effective_decay(&m, &chain, &points).unwrap();
            worst = worst.max((gamma - closed).abs() / closed.max(1.0));
        }
    }
    out.check(format!("decay reduction identity {worst:.1e}"), worst <= 1e-12);

    let n = 6;
    let m = DMatrix::from_fn(n, n, |r, c| if r == c { 0.0 } else { 0.3 + 0.1 * (r + c) as f64 });
    let modes = dressed_modes(&SuperatomSpec::custom("X", vec![0.1, -0.4, 0.9, 0.0, 0.2, -1.0], m));
    let mut ortho = 0.0f64;
    for a in &modes {
        for b in &modes {
            let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
            ortho = ortho.max((dot - if a.index == b.index { 1.0 } else { 0.0 }).abs());
        }
    }
    out.check(format!("dressed-mode orthonormality {ortho:.1e}"), ortho <= 1e-12);

    let chain = ChainSpec::new("w", 3, 1.0);
    let mut green = 0.0f64;
    for (omega, d) in [(0.0, 0usize), (0.7, 3), (-1.2, 7), (1.9, 2)] {
        let g = chain.retarded_greens_function(omega, d as i64).unwrap();
        green = green.max((g - resolvent_oracle(1.0, omega, d)).norm());
    }
    out.check(format!("green's function vs inversion {green:.1e} <= 1e-3/xi"), green <= 1e-3);

    let mut rev = 0.0f64;
    for (beta, tau) in [(0.045, 0.4526), (0.2, 3.0), (0.9, 17.0)] {
        let emit = Schedule::emit("e", 1.0, beta, 0.0);
        let absorb = Schedule::absorb_partner(&emit, "a", tau);
        for i in -400..=400 {
            let t = 0.5 * i as f64;
            rev = rev.max((absorb.value(t) - emit.value(tau - t)).abs());
        }
    }
    out.check(format!("schedule time reversal {rev:.1e} <= 1e-15"), rev <= 1e-15);

    let s = Scenario::S6(S6Params {
        bloch_gradient_over_hopping: 0.0,
        ..Default::default()
    });
    let opts = RunOptions {
        overrides: Overrides {
            dt: None,
            horizon: Some(20.0),
        },
        ..Default::default()
    };
    let first = s.run(&opts).unwrap().to_json();
    let second = s.run(&opts).unwrap().to_json();
    out.check("rerun is byte-identical", first == second);
}

#[test]
fn acceptance() {
    let r = reports();
    let [s1, s2, s1_bright, s2_swap, s3, s4, s5, s6, s7] = &r[..] else {
        panic!("batch size")
    };
    let mut all = Vec::new();

    let mut c = Outcome::new("1 dark state and decay rate");
    c.criteria(s1, &["dark_state_min_fidelity", "control_decay_relative_error"]);
    c.criteria(s1_bright, &["decay_rate_relative_error"]);
    all.push(c);

    let mut c = Outcome::new("2 decoherence-free transfer and swap");
    c.criteria(s2, &["peak_fidelity"]);
    c.criteria(s2_swap, &["peak_fidelity"]);
    let (a, b) = (
        s2.get("coherence_34_at_peak").unwrap(),
        s2_swap.get("coherence_34_at_peak").unwrap(),
    );
    c.check(format!("coherence_34 sign change {a:+.4} -> {b:+.4}"), a * b < 0.0);
    all.push(c);

    let mut c = Outcome::new("3 SSH edge injection");
    c.criteria(s3, &["peak_edge_fidelity", "q_sublattice_population", "right_edge_overlap"]);
    all.push(c);

    let mut c = Outcome::new("4 chiral pitch-catch");
    c.criteria(
        s4,
        &["final_fidelity", "wrong_direction_fraction", "tau_relative_error"],
    );
    all.push(c);

    let mut c = Outcome::new("5 remote W state");
    c.criteria(s5, &["final_w_fidelity"]);
    all.push(c);

    let mut c = Outcome::new("6 effective lattice");
    braided_coupling(&mut c);
    c.criteria(s2, &["transfer_time_relative_error"]);
    c.criteria(s6, &["revival_error"]);
    all.push(c);

    let mut c = Outcome::new("7 two-waveguide selectivity");
    c.criteria(
        s7,
        &["band_membership", "minus_selectivity", "zero_selectivity", "plus_selectivity"],
    );
    all.push(c);

    let mut c = Outcome::new("8 property suite");
    property_suite(&mut c);
    all.push(c);

    for c in &all {
        println!("{} criterion {}", if c.passed() { "PASS" } else { "FAIL" }, c.label);
        for (what, ok) in &c.checks {
            println!("    {} {what}", if *ok { "ok  " } else { "FAIL" });
        }
    }
    let failed: Vec<_> = all.iter().filter(|c| !c.passed()).map(|c| c.label).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
