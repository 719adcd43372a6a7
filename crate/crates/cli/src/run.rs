//! Command execution: a validated [`RunConfig`] in, CSV text and a JSON
//! summary out.

use serde_json::{json, Value};

use rsbc_core::codes::{build_codewords, codeword_overlap, mean_photon_of_code};
use rsbc_core::metrics::{evaluate, BoundModel, MetricRecord, RepeaterScenario};
use rsbc_core::output::{format_number, to_csv_string};
use rsbc_core::sweep::{
    calibrate_t0, cost_at, find_l0_for_cost, minimize_cost, optimize_skr, required_links,
    run_sweep, Directive, SweepPlan,
};
use rsbc_core::{Error, Result};

use crate::config::{Command, RunConfig};

pub struct RunOutput {
    pub csv: String,
    /// Command-specific results for the JSON sidecar.
    pub results: Value,
}

/// Core errors with the grid point or stage they came from.
#[derive(Debug)]
pub struct ComputeError {
    pub context: String,
    pub source: Error,
}

impl std::fmt::Display for ComputeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.context, self.source)
    }
}

fn ctx<T>(r: Result<T>, context: impl FnOnce() -> String) -> std::result::Result<T, ComputeError> {
    r.map_err(|source| ComputeError {
        context: context(),
        source,
    })
}

type Out = std::result::Result<RunOutput, ComputeError>;

pub fn execute(config: &RunConfig, config_hash: &str) -> Out {
    match config.command {
        Command::Codewords => codewords(config),
        Command::Link => link(config),
        Command::Sweep => sweep(config, config_hash),
        Command::Optimize => optimize(config),
        Command::Resources => resources(config),
        Command::Cost => cost(config),
        Command::Bounds => bounds(config),
    }
}

fn scenario(config: &RunConfig) -> &RepeaterScenario {
    config
        .scenario
        .as_ref()
        .expect("validated config has a scenario")
}

fn records_csv(records: &[MetricRecord]) -> std::result::Result<String, ComputeError> {
    ctx(to_csv_string(records), || "writing CSV".into())
}

fn failed_points(records: &[MetricRecord]) -> usize {
    records.iter().filter(|r| r.is_failed()).count()
}

fn codewords(config: &RunConfig) -> Out {
    let pair = ctx(build_codewords(&config.spec), || {
        "building codewords".into()
    })?;
    let mut csv = String::from("n,zero_re,zero_im,one_re,one_im\n");
    for n in 0..=pair.zero.cutoff() {
        let (z, o) = (pair.zero.amplitude(n), pair.one.amplitude(n));
        csv.push_str(&format!(
            "{n},{},{},{},{}\n",
            format_number(z.re),
            format_number(z.im),
            format_number(o.re),
            format_number(o.im)
        ));
    }
    let overlap = codeword_overlap(&pair);
    let nbar = ctx(mean_photon_of_code(&config.spec), || {
        "mean photon number".into()
    })?;
    Ok(RunOutput {
        csv,
        results: json!({
            "family": config.spec.family.as_str(),
            "M": config.spec.m,
            "cutoff": config.spec.cutoff,
            "norm_constant": pair.norm_constant,
            "overlap_re": overlap.re,
            "overlap_im": overlap.im,
            "mean_photon_number": nbar,
            "tail_mass_zero": pair.zero.tail_mass(),
            "tail_mass_one": pair.one.tail_mass(),
        }),
    })
}

fn link(config: &RunConfig) -> Out {
    let record = ctx(
        evaluate(&config.spec, scenario(config), config.model),
        || "evaluating link".into(),
    )?;
    Ok(RunOutput {
        csv: records_csv(std::slice::from_ref(&record))?,
        results: json!({ "skr_bpcu": record.skr, "cost_coeff": finite(record.cost_coeff) }),
    })
}

fn sweep(config: &RunConfig, config_hash: &str) -> Out {
    let plan = SweepPlan {
        scenario: scenario(config).clone(),
        spec: config.spec.clone(),
        axes: config.axes.clone(),
        directive: if config.bounds.is_empty() {
            Directive::None
        } else {
            Directive::MaximizeSkr(config.bounds.clone())
        },
        model: config.model,
        settings: config.settings,
        config_hash: config_hash.to_string(),
    };
    let result = ctx(run_sweep(&plan), || "planning sweep".into())?;
    Ok(RunOutput {
        csv: records_csv(&result.records)?,
        results: json!({
            "points": result.records.len(),
            "failed_points": failed_points(&result.records),
        }),
    })
}

fn optimize(config: &RunConfig) -> Out {
    let s = scenario(config);
    let best = ctx(
        optimize_skr(
            s,
            &config.spec,
            &config.bounds,
            config.model,
            &config.settings,
        ),
        || format!("optimizing at L0 = {} km", s.l0_km),
    )?;
    Ok(RunOutput {
        csv: records_csv(std::slice::from_ref(&best.record))?,
        results: json!({
            "skr_bpcu": best.record.skr,
            "alpha": best.spec.alpha,
            "r": best.spec.r,
            "K": best.spec.k,
            "delta": best.spec.delta,
        }),
    })
}

/// Record at `scenario`, with the code re-optimized when bounds are given.
fn best_record(config: &RunConfig, s: &RepeaterScenario) -> Result<MetricRecord> {
    if config.bounds.is_empty() {
        evaluate(&config.spec, s, config.model)
    } else {
        optimize_skr(
            s,
            &config.spec,
            &config.bounds,
            config.model,
            &config.settings,
        )
        .map(|o| o.record)
    }
}

fn resources(config: &RunConfig) -> Out {
    let s = scenario(config);
    let target = config.target_skr.expect("validated");
    let n = ctx(
        required_links(
            target,
            &config.spec,
            &config.bounds,
            s,
            config.model,
            &config.settings,
            config.n_max,
        ),
        || format!("searching links for target {target:e}"),
    )?;
    let at = ctx(s.at_links(n), || format!("{n} links"))?;
    let record = ctx(best_record(config, &at), || format!("evaluating {n} links"))?;
    Ok(RunOutput {
        csv: records_csv(std::slice::from_ref(&record))?,
        results: json!({
            "target_skr": target,
            "n_links": n,
            "L0_km": at.l0_km,
            "skr_bpcu": record.skr,
        }),
    })
}

fn cost(config: &RunConfig) -> Out {
    let mut s = scenario(config).clone();
    let args = (
        &config.spec,
        &config.bounds[..],
        config.model,
        &config.settings,
    );
    let mut results = serde_json::Map::new();
    if let Some(l0) = config.calibrate_l0 {
        let target = config.target_cost.expect("validated");
        let t0 = ctx(
            calibrate_t0(target, l0, args.0, args.1, &s, args.2, args.3),
            || format!("calibrating t0 at L0 = {l0} km"),
        )?;
        s.t0_s = t0;
        results.insert("t0_s".into(), json!(t0));
    }
    let opt = ctx(minimize_cost(args.0, args.1, &s, args.2, args.3), || {
        "minimizing cost".into()
    })?;
    results.insert("L0_opt_km".into(), json!(opt.l0_km));
    results.insert("cost_opt".into(), json!(opt.cost));
    let mut rows = vec![("cost_optimum".to_string(), opt.l0_km)];
    if let Some(target) = config.target_cost {
        let l0 = ctx(
            find_l0_for_cost(target, args.0, args.1, &s, args.2, args.3),
            || format!("finding L0 for cost {target:e}"),
        )?;
        results.insert("target_cost".into(), json!(target));
        results.insert("L0_target_km".into(), json!(l0));
        rows.push(("target_cost".into(), l0));
    }
    for axis in &config.axes {
        for l0 in axis.grid.points().expect("validated") {
            rows.push((format!("grid L0 = {l0}"), l0));
        }
    }
    let mut records = Vec::with_capacity(rows.len());
    let mut continuous = Vec::with_capacity(rows.len());
    for (label, l0) in &rows {
        let point = ctx(cost_at(*l0, args.0, args.1, &s, args.2, args.3), || {
            format!("{label} (L0 = {l0} km)")
        })?;
        let at = ctx(s.at_l0(*l0), || format!("{label} (L0 = {l0} km)"))?;
        let record = ctx(evaluate(&point.spec, &at, config.model), || {
            format!("{label} (L0 = {l0} km)")
        })?;
        continuous.push(finite(point.cost));
        records.push(record);
    }
    results.insert(
        "rows".into(),
        json!(rows.iter().map(|r| &r.0).collect::<Vec<_>>()),
    );
    results.insert("cost_continuous".into(), json!(continuous));
    Ok(RunOutput {
        csv: records_csv(&records)?,
        results: Value::Object(results),
    })
}

/// Three rows per total distance, one per fidelity model: upper bound,
/// overlap lower bound, worst-case lower bound.
fn bounds(config: &RunConfig) -> Out {
    let s = scenario(config);
    let distances = match config.axes.first() {
        Some(axis) => axis.grid.points().expect("validated"),
        None => vec![s.l_tot_km],
    };
    let models = [
        BoundModel::ExactProportional,
        BoundModel::OverlapBound,
        BoundModel::WorstCase,
    ];
    let mut records = Vec::new();
    for l in distances {
        let mut at = ctx(RepeaterScenario::with_links(l, s.n_links), || {
            format!("L_tot = {l} km")
        })?;
        at = RepeaterScenario {
            l_tot_km: at.l_tot_km,
            l0_km: at.l0_km,
            n_links: at.n_links,
            ..s.clone()
        };
        for model in models {
            records.push(evaluate(&config.spec, &at, model).unwrap_or_else(|e| {
                MetricRecord::failed(config.spec.clone(), at.clone(), model, &e)
            }));
        }
    }
    Ok(RunOutput {
        csv: records_csv(&records)?,
        results: json!({
            "rows_per_distance": models.map(|m| m.as_str()),
            "failed_points": failed_points(&records),
        }),
    })
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(format_number(x))
    }
}
