use criterion::{criterion_group, criterion_main, Criterion};

use dsdm_core::scenario::parse_scenario;
use dsdm_core::{run_scenario, ScenarioSpec};

fn bundled(name: &str) -> ScenarioSpec {
    let path = format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_scenario(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn scenarios(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_scenario");
    group.sample_size(20);
    for name in ["stiff_heavy", "fixed_ground", "compliant"] {
        let spec = bundled(&format!("{name}.scenario"));
        group.bench_function(name, |b| {
            b.iter(|| run_scenario(&spec.actuator, &spec.load, &spec.controller, &spec.sim).unwrap())
        });
    }
    group.finish();

    let text = std::fs::read_to_string(format!(
        "{}/../../scenarios/stiff_heavy.scenario",
        env!("CARGO_MANIFEST_DIR")
    ))
    .unwrap();
    c.bench_function("parse_scenario", |b| b.iter(|| parse_scenario(&text).unwrap()));
}

criterion_group!(benches, scenarios);
criterion_main!(benches);
