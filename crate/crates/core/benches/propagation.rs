use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gsa_core::dynamics::{AssembledSystem, PropagationOptions, System, SystemState};
use gsa_core::lattice::ChainSpec;
use gsa_core::layout::giant_atom_pair;
use gsa_core::scenarios::{S1Params, S6Params, Scenario};
use gsa_core::superatom::SuperatomSpec;
use gsa_core::{run_batch, Execution, RunOptions};
use num_complex::Complex64;

fn pair_on_chain(sites: usize) -> AssembledSystem {
    let chain = ChainSpec::new("w", sites, 12.5).with_absorbing(sites / 8, None);
    AssembledSystem::new(System {
        chains: vec![chain],
        superatoms: vec![SuperatomSpec::pair("A", 0.0, 0.0, 17.7)],
        couplings: giant_atom_pair("A", 0, "w", 0, 2, 1.0, 1.57).to_vec(),
        schedules: vec![],
    })
    .unwrap()
}

fn sparse_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply");
    for sites in [4_000, 40_000, 400_000] {
        let sys = pair_on_chain(sites);
        let h = sys.assemble(0.0);
        let x: Vec<Complex64> = (0..sys.dim()).map(|i| Complex64::new(1.0, i as f64 * 1e-6)).collect();
        let mut y = vec![Complex64::default(); sys.dim()];
        for (label, parallel) in [("sequential", false), ("parallel", true)] {
            group.bench_with_input(BenchmarkId::new(label, sites), &sites, |b, _| {
                b.iter(|| h.apply(&x, &mut y, parallel))
            });
        }
    }
    group.finish();
}

fn propagate(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate");
    group.sample_size(10);
    for sites in [4_000, 40_000] {
        let sys = pair_on_chain(sites);
        let psi = SystemState::from_pattern(sys.dim(), &[(0, Complex64::new(1.0, 0.0))], 0.0);
        for (label, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            let opts = PropagationOptions::default().with_execution(execution);
            group.bench_with_input(BenchmarkId::new(label, sites), &sites, |b, _| {
                b.iter(|| sys.propagate(&psi, 0.5, &opts, |_, _| {}).unwrap())
            });
        }
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_batch");
    group.sample_size(10);
    let scenarios: Vec<Scenario> = (1..=4)
        .map(|separation| {
            Scenario::S1(S1Params {
                separation,
                horizon: 5.0,
                control: false,
                ..Default::default()
            })
        })
        .chain([Scenario::S6(S6Params::default())])
        .collect();
    for (label, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let opts = RunOptions {
            execution,
            ..Default::default()
        };
        group.bench_function(label, |b| b.iter(|| run_batch(&scenarios, &opts)));
    }
    group.finish();
}

criterion_group!(benches, sparse_apply, propagate, batch);
criterion_main!(benches);
