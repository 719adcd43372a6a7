use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rsbc_core::codes::CodeSpec;
use rsbc_core::metrics::{BoundModel, RepeaterScenario};
use rsbc_core::par::Execution;
use rsbc_core::sweep::{run_sweep, Directive, Grid, Param, ParamBounds, SweepPlan};

fn grid_plan(execution: Execution) -> SweepPlan {
    let mut plan = SweepPlan::new(
        CodeSpec::binomial(4, 1),
        RepeaterScenario::new(500.0, 0.5).unwrap(),
    )
    .with_axis(
        Param::L0,
        Grid::Range {
            min: 0.2,
            max: 1.2,
            step: 0.1,
        },
    )
    .with_axis(
        Param::K,
        Grid::Range {
            min: 1.0,
            max: 6.0,
            step: 1.0,
        },
    );
    plan.model = BoundModel::OverlapBound;
    plan.settings.execution = execution;
    plan
}

fn optimized_plan(execution: Execution) -> SweepPlan {
    let mut plan = SweepPlan::new(
        CodeSpec::cat(2, 1.0),
        RepeaterScenario::new(500.0, 0.4).unwrap(),
    )
    .with_axis(
        Param::L0,
        Grid::Range {
            min: 0.3,
            max: 1.0,
            step: 0.1,
        },
    );
    plan.directive = Directive::MaximizeSkr(vec![ParamBounds::new(Param::Alpha, 0.05, 3.0)]);
    plan.settings.execution = execution;
    plan
}

fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, mode) in [
        ("serial", Execution::Serial),
        ("parallel", Execution::Parallel),
    ] {
        let plan = grid_plan(mode);
        group.bench_with_input(BenchmarkId::new("binomial_grid", name), &plan, |b, p| {
            b.iter(|| run_sweep(p).unwrap())
        });
        let plan = optimized_plan(mode);
        group.bench_with_input(BenchmarkId::new("cat_optimized", name), &plan, |b, p| {
            b.iter(|| run_sweep(p).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
