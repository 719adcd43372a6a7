//! Parameter grids, key-rate optimization, link counting and cost searches.
//!
//! Grid points are independent and run through [`par::map`]; every search is
//! sequential internally, so results do not depend on the execution mode.

use std::time::{SystemTime, UNIX_EPOCH};

use crate::codes::{build_codewords, CodeSpec, Family};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate, link_metrics, log_cost, log_skr_continuous, BoundModel, MetricRecord,
    RepeaterScenario,
};
use crate::par::{self, Execution};

/// Resource searches stop at this many links.
pub const DEFAULT_N_MAX: usize = 20_000;
/// Elementary-distance window of the cost searches, km.
pub const COST_L0_RANGE_KM: (f64, f64) = (0.01, 5.0);
/// Resolution of [`find_l0_for_cost`], km.
pub const L0_RESOLUTION_KM: f64 = 1e-4;

const ALPHA_MAX: f64 = 3.0;
const R_MAX: f64 = 0.2;
const DELTA_MAX: f64 = 2.0;
const K_MAX: usize = 10;
const LINEAR_SCAN: usize = 8;
const COST_COARSE_POINTS: usize = 61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Alpha,
    R,
    Delta,
    K,
    /// Binomial mean photon number `K M / 2`, rounded to the nearest `K`.
    NBar,
    L0,
    LTot,
    NLinks,
}

impl Param {
    pub const ALL: [Param; 8] = [
        Param::Alpha,
        Param::R,
        Param::Delta,
        Param::K,
        Param::NBar,
        Param::L0,
        Param::LTot,
        Param::NLinks,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Param::Alpha => "alpha",
            Param::R => "r",
            Param::Delta => "delta",
            Param::K => "K",
            Param::NBar => "nbar",
            Param::L0 => "L0",
            Param::LTot => "L_tot",
            Param::NLinks => "n_links",
        }
    }

    pub fn is_code_param(self) -> bool {
        matches!(
            self,
            Param::Alpha | Param::R | Param::Delta | Param::K | Param::NBar
        )
    }

    fn is_integer(self) -> bool {
        matches!(self, Param::K | Param::NBar | Param::NLinks)
    }
}

impl std::fmt::Display for Param {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Param {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidPlan(format!("unknown parameter {s:?}")))
    }
}

fn family_param(family: Family, param: Param) -> bool {
    match param {
        Param::Alpha => family != Family::Binomial,
        Param::R => family == Family::SqueezedCat,
        Param::Delta => family == Family::GkpLike,
        Param::K | Param::NBar => family == Family::Binomial,
        _ => true,
    }
}

fn set_code_param(spec: &CodeSpec, param: Param, x: f64) -> CodeSpec {
    let mut s = spec.clone();
    match param {
        Param::Alpha => s.alpha = Some(x),
        Param::R => s.r = Some(x),
        Param::Delta => s.delta = Some(x),
        Param::K => s.k = Some(x.round() as usize),
        Param::NBar => s.k = Some((2.0 * x / s.m as f64).round() as usize),
        _ => unreachable!("not a code parameter"),
    }
    s
}

fn set_scenario_param(
    scenario: &RepeaterScenario,
    param: Param,
    x: f64,
) -> Result<RepeaterScenario> {
    match param {
        Param::L0 => scenario.at_l0(x),
        Param::LTot => {
            let mut template = scenario.clone();
            template.l_tot_km = x;
            template.at_l0(scenario.l0_km)
        }
        Param::NLinks => scenario.at_links(x.round() as usize),
        _ => unreachable!("not a scenario parameter"),
    }
}

/// Grid along one axis.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// `min, min + step, ...` up to and including `max`.
    Range {
        min: f64,
        max: f64,
        step: f64,
    },
    List(Vec<f64>),
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let bad = |m: String| Err(Error::InvalidPlan(m));
        let pts = match self {
            Grid::Range { min, max, step } => {
                if !(min.is_finite() && max.is_finite() && step.is_finite()) {
                    return bad("grid bounds must be finite".into());
                }
                if *step <= 0.0 || max < min {
                    return bad(format!("empty grid {min}..{max} step {step}"));
                }
                let n = ((max - min) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| min + i as f64 * step).collect()
            }
            Grid::List(v) => v.clone(),
        };
        if pts.is_empty() {
            return bad("grid has no points".into());
        }
        if pts.iter().any(|x| !x.is_finite()) {
            return bad("grid points must be finite".into());
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub grid: Grid,
}

/// Search interval for one code parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub param: Param,
    pub lo: f64,
    pub hi: f64,
}

impl ParamBounds {
    pub fn new(param: Param, lo: f64, hi: f64) -> Self {
        Self { param, lo, hi }
    }

    /// Checks the interval against the physical guards of its parameter.
    pub fn validate(&self, spec: &CodeSpec) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlan(m));
        let (lo, hi, p) = (self.lo, self.hi, self.param);
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return bad(format!("bounds for {p} must be finite with lo <= hi"));
        }
        if !p.is_code_param() {
            return bad(format!("{p} cannot be optimized"));
        }
        if !family_param(spec.family, p) {
            return bad(format!("family {} has no parameter {p}", spec.family));
        }
        let ok = match p {
            Param::Alpha => lo > 0.0 && hi <= ALPHA_MAX,
            Param::R => lo >= 0.0 && hi <= R_MAX,
            Param::Delta => lo > 0.0 && hi <= DELTA_MAX,
            Param::K => lo >= 1.0 && hi <= K_MAX as f64,
            Param::NBar => {
                let per_k = spec.m as f64 / 2.0;
                lo >= per_k && hi <= K_MAX as f64 * per_k
            }
            _ => false,
        };
        if !ok {
            return bad(format!(
                "bounds [{lo}, {hi}] for {p} outside the physical range"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    None,
    MaximizeSkr(Vec<ParamBounds>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Coarse grid points per continuous dimension.
    pub coarse_points: usize,
    /// Local maxima of the coarse grid refined by golden section.
    pub refine_peaks: usize,
    /// Golden-section bracket width at termination, in parameter units.
    pub tolerance: f64,
    pub execution: Execution,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            coarse_points: 121,
            refine_peaks: 4,
            tolerance: 1e-6,
            execution: Execution::default(),
        }
    }
}

impl OptimizerSettings {
    fn validate(&self) -> Result<()> {
        if self.coarse_points < 25 {
            return Err(Error::InvalidPlan(
                "coarse grid needs at least 25 points".into(),
            ));
        }
        if self.refine_peaks < 1 || self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidPlan(
                "refinement settings must be positive".into(),
            ));
        }
        Ok(())
    }

    fn serial(&self) -> Self {
        Self {
            execution: Execution::Serial,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub scenario: RepeaterScenario,
    pub spec: CodeSpec,
    /// Swept axes; the first varies slowest.
    pub axes: Vec<Axis>,
    pub directive: Directive,
    pub model: BoundModel,
    pub settings: OptimizerSettings,
    /// Hash of the configuration that produced the plan, echoed into the
    /// result.
    pub config_hash: String,
}

impl SweepPlan {
    pub fn new(spec: CodeSpec, scenario: RepeaterScenario) -> Self {
        Self {
            scenario,
            spec,
            axes: Vec::new(),
            directive: Directive::None,
            model: BoundModel::ExactProportional,
            settings: OptimizerSettings::default(),
            config_hash: String::new(),
        }
    }

    pub fn with_axis(mut self, param: Param, grid: Grid) -> Self {
        self.axes.push(Axis { param, grid });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.scenario.validate()?;
        self.settings.validate()?;
        for (i, axis) in self.axes.iter().enumerate() {
            axis.grid.points()?;
            if !family_param(self.spec.family, axis.param) {
                return Err(Error::InvalidPlan(format!(
                    "family {} has no parameter {}",
                    self.spec.family, axis.param
                )));
            }
            if self.axes[..i].iter().any(|a| a.param == axis.param) {
                return Err(Error::InvalidPlan(format!("{} swept twice", axis.param)));
            }
        }
        if let Directive::MaximizeSkr(bounds) = &self.directive {
            for b in bounds {
                b.validate(&self.spec)?;
                if self.axes.iter().any(|a| a.param == b.param) {
                    return Err(Error::InvalidPlan(format!(
                        "{} is both swept and optimized",
                        b.param
                    )));
                }
            }
        }
        Ok(())
    }

    /// Grid points in row-major order, each as a concrete code and scenario.
    pub fn points(&self) -> Result<Vec<(CodeSpec, RepeaterScenario)>> {
        let mut points = vec![(self.spec.clone(), self.scenario.clone())];
        for axis in &self.axes {
            let values = axis.grid.points()?;
            let mut next = Vec::with_capacity(points.len() * values.len());
            for (spec, scenario) in &points {
                for &x in &values {
                    if axis.param.is_code_param() {
                        let s = set_code_param(spec, axis.param, x);
                        s.validate()?;
                        next.push((s, scenario.clone()));
                    } else {
                        next.push((spec.clone(), set_scenario_param(scenario, axis.param, x)?));
                    }
                }
            }
            points = next;
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_hash: String,
    pub timestamp_unix_s: u64,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<MetricRecord>,
    pub provenance: Provenance,
}

/// One record per grid point, in grid order. Points that fail are kept as
/// flagged records.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let points = plan.points()?;
    let inner = plan.settings.serial();
    let records = par::map(plan.settings.execution, &points, |(spec, scenario)| {
        let result = match &plan.directive {
            Directive::None => evaluate(spec, scenario, plan.model),
            Directive::MaximizeSkr(bounds) => {
                optimize_skr(scenario, spec, bounds, plan.model, &inner).map(|o| o.record)
            }
        };
        result.unwrap_or_else(|e| {
            MetricRecord::failed(spec.clone(), scenario.clone(), plan.model, &e)
        })
    });
    let timestamp_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(SweepResult {
        records,
        provenance: Provenance {
            config_hash: plan.config_hash.clone(),
            timestamp_unix_s,
            version: env!("CARGO_PKG_VERSION"),
        },
    })
}

/// `ln skr` with the link count taken as the real number `L_tot / L0`;
/// `-inf` if the point cannot be evaluated.
fn code_log_skr(spec: &CodeSpec, scenario: &RepeaterScenario, n: f64, model: BoundModel) -> f64 {
    let run = || -> Result<f64> {
        let pair = build_codewords(spec)?;
        let link = link_metrics(&pair, scenario.eta()?, model)?;
        Ok(log_skr_continuous(
            link.p0,
            link.f0,
            n,
            scenario.composition,
            scenario.secret_fraction,
        ))
    };
    run().unwrap_or(f64::NEG_INFINITY)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub spec: CodeSpec,
    pub record: MetricRecord,
}

/// Maximizes the key rate over the bounded code parameters, nesting one
/// dimension inside the next. Each continuous dimension gets a coarse grid
/// followed by golden-section refinement of its best local maxima; integer
/// dimensions are enumerated. Ties go to the smaller parameter value.
pub fn optimize_skr(
    scenario: &RepeaterScenario,
    template: &CodeSpec,
    bounds: &[ParamBounds],
    model: BoundModel,
    settings: &OptimizerSettings,
) -> Result<Optimum> {
    scenario.validate()?;
    let n = scenario.n_links as f64;
    let (value, spec) = best_code(template, bounds, settings, &|s| {
        code_log_skr(s, scenario, n, model)
    })?;
    if value == f64::NEG_INFINITY {
        return Err(Error::NoKey);
    }
    let record = evaluate(&spec, scenario, model)?;
    Ok(Optimum { spec, record })
}

type Objective<'a> = dyn Fn(&CodeSpec) -> f64 + Sync + 'a;

fn best_code(
    template: &CodeSpec,
    bounds: &[ParamBounds],
    settings: &OptimizerSettings,
    f: &Objective<'_>,
) -> Result<(f64, CodeSpec)> {
    settings.validate()?;
    for b in bounds {
        b.validate(template)?;
    }
    for (i, b) in bounds.iter().enumerate() {
        let k_like = |p: Param| matches!(p, Param::K | Param::NBar);
        if bounds[..i]
            .iter()
            .any(|a| a.param == b.param || (k_like(a.param) && k_like(b.param)))
        {
            return Err(Error::InvalidPlan(format!("{} bounded twice", b.param)));
        }
    }
    Ok(maximize(bounds, template, f, settings, settings.execution))
}

fn maximize(
    dims: &[ParamBounds],
    spec: &CodeSpec,
    f: &Objective<'_>,
    settings: &OptimizerSettings,
    exec: Execution,
) -> (f64, CodeSpec) {
    let Some((dim, rest)) = dims.split_first() else {
        return (f(spec), spec.clone());
    };
    let g = |x: f64| {
        maximize(
            rest,
            &set_code_param(spec, dim.param, x),
            f,
            settings,
            Execution::Serial,
        )
    };

    if dim.param.is_integer() {
        let (lo, hi) = integer_range(dim, spec);
        let ks: Vec<f64> = (lo..=hi).map(|k| k as f64).collect();
        let vals = par::map(exec, &ks, |&k| g(k));
        return pick_max(vals.into_iter().zip(ks))
            .map(|(v, _)| v)
            .unwrap_or_else(|| g(lo as f64));
    }

    if dim.lo == dim.hi {
        return g(dim.lo);
    }
    let xs = linspace(dim.lo, dim.hi, settings.coarse_points);
    let vals = par::map(exec, &xs, |&x| g(x));
    let mut candidates: Vec<((f64, CodeSpec), f64)> = Vec::new();
    for i in top_local_maxima(
        &vals.iter().map(|v| v.0).collect::<Vec<_>>(),
        settings.refine_peaks,
    ) {
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(xs.len() - 1)];
        let (x, v) = golden_max(&|x| g(x), a, b, xs[i], vals[i].clone(), settings.tolerance);
        candidates.push((v, x));
    }
    candidates.extend(vals.into_iter().zip(xs));
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    pick_max(candidates.into_iter())
        .map(|(v, _)| v)
        .expect("coarse grid is nonempty")
}

fn integer_range(dim: &ParamBounds, spec: &CodeSpec) -> (usize, usize) {
    let (lo, hi) = match dim.param {
        Param::NBar => {
            let per_k = spec.m as f64 / 2.0;
            (dim.lo / per_k, dim.hi / per_k)
        }
        _ => (dim.lo, dim.hi),
    };
    let lo = (lo - 1e-9).ceil().max(1.0) as usize;
    let hi = ((hi + 1e-9).floor() as usize).max(lo);
    (lo, hi)
}

/// First maximum in iteration order; callers order by ascending parameter so
/// ties resolve toward the smaller value.
fn pick_max<T>(items: impl Iterator<Item = ((f64, T), f64)>) -> Option<((f64, T), f64)> {
    let mut best: Option<((f64, T), f64)> = None;
    for item in items {
        let better = match &best {
            None => true,
            Some(b) => item.0 .0 > b.0 .0,
        };
        if better {
            best = Some(item);
        }
    }
    best
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
        .collect()
}

/// Indices of the `count` highest finite local maxima (plateaus included).
fn top_local_maxima(vals: &[f64], count: usize) -> Vec<usize> {
    let mut peaks: Vec<usize> = (0..vals.len())
        .filter(|&i| {
            vals[i].is_finite()
                && (i == 0 || vals[i] >= vals[i - 1])
                && (i + 1 == vals.len() || vals[i] >= vals[i + 1])
        })
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    peaks.truncate(count);
    peaks
}

/// Golden-section search for a maximum of `g` in `[a, b]`, seeded with a known
/// interior value. Returns the best point evaluated.
fn golden_max<T: Clone>(
    g: &dyn Fn(f64) -> (f64, T),
    mut a: f64,
    mut b: f64,
    seed_x: f64,
    seed: (f64, T),
    tol: f64,
) -> (f64, (f64, T)) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut best = (seed_x, seed);
    let mut consider = |x: f64, v: &(f64, T)| {
        if v.0 > best.1 .0 || (v.0 == best.1 .0 && x < best.0) {
            best = (x, v.clone());
        }
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    consider(c, &gc);
    consider(d, &gd);
    while b - a > tol {
        if gc.0 >= gd.0 {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
            consider(c, &gc);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
            consider(d, &gd);
        }
    }
    best
}

/// Best `ln skr` at a scenario, optimized over `bounds` (fixed code when
/// empty), with the link count taken as `n`.
fn best_log_skr(
    template: &CodeSpec,
    bounds: &[ParamBounds],
    scenario: &RepeaterScenario,
    n: f64,
    model: BoundModel,
    settings: &OptimizerSettings,
) -> Result<(f64, CodeSpec)> {
    best_code(template, bounds, settings, &|s| {
        code_log_skr(s, scenario, n, model)
    })
}

/// Smallest link count whose key rate at `L0 = L_tot / n` meets `target`.
/// Geometric growth brackets the threshold, bisection narrows it, and a short
/// linear scan below the result guards against a non-monotone edge.
pub fn required_links(
    target_skr: f64,
    template: &CodeSpec,
    bounds: &[ParamBounds],
    scenario: &RepeaterScenario,
    model: BoundModel,
    settings: &OptimizerSettings,
    n_max: usize,
) -> Result<usize> {
    if !(target_skr.is_finite() && target_skr > 0.0) {
        return Err(Error::Domain(format!("target key rate {target_skr}")));
    }
    if n_max < 1 {
        return Err(Error::Domain("n_max must be positive".into()));
    }
    let ln_target = target_skr.ln();
    let meets = |n: usize| -> Result<bool> {
        let s = scenario.at_links(n)?;
        let (v, _) = best_log_skr(template, bounds, &s, n as f64, model, settings)?;
        Ok(v >= ln_target)
    };

    let mut lo = 0;
    let mut hi = 1;
    loop {
        if meets(hi)? {
            break;
        }
        if hi >= n_max {
            return Err(Error::Unreachable {
                target: target_skr,
                n_max,
            });
        }
        lo = hi;
        hi = (2 * hi).min(n_max);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut best = hi;
    for n in (hi.saturating_sub(LINEAR_SCAN).max(1)..hi).rev() {
        if meets(n)? {
            best = n;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostPoint {
    pub l0_km: f64,
    /// `C'` with the link count taken as `L_tot / L0`.
    pub cost: f64,
    pub spec: CodeSpec,
}

/// `ln C'(L0)` with the code re-optimized at `L0`.
fn log_cost_at(
    l0: f64,
    template: &CodeSpec,
    bounds: &[ParamBounds],
    scenario: &RepeaterScenario,
    model: BoundModel,
    settings: &OptimizerSettings,
) -> Result<(f64, CodeSpec)> {
    let mut s = scenario.clone();
    s.l0_km = l0;
    let n = s.l_tot_km / l0;
    let (ln_skr, spec) = best_log_skr(template, bounds, &s, n, model, settings)?;
    Ok((log_cost(ln_skr, &s), spec))
}

/// Cost coefficient at one elementary distance, code re-optimized.
pub fn cost_at(
    l0_km: f64,
    template: &CodeSpec,
    bounds: &[ParamBounds],
    scenario: &RepeaterScenario,
    model: BoundModel,
    settings: &OptimizerSettings,
) -> Result<CostPoint> {
    check_l0(l0_km, scenario)?;
    let (lc, spec) = log_cost_at(l0_km, template, bounds, scenario, model, settings)?;
    Ok(CostPoint {
        l0_km,
        cost: lc.exp(),
        spec,
    })
}

fn check_l0(l0: f64, scenario: &RepeaterScenario) -> Result<()> {
    if !(l0 > 0.0 && l0 <= scenario.l_tot_km) {
        return Err(Error::Domain(format!(
            "elementary distance {l0} km outside (0, {}]",
            scenario.l_tot_km
        )));
    }
    Ok(())
}

fn cost_window(scenario: &RepeaterScenario) -> Result<(f64, f64)> {
    let (lo, hi) = COST_L0_RANGE_KM;
    let hi = hi.min(scenario.l_tot_km);
    if hi <= lo {
        return Err(Error::Domain(format!(
            "total distance {} km leaves no room for a cost search",
            scenario.l_tot_km
        )));
    }
    Ok((lo, hi))
}

/// Minimizes `C'` over `L0` in [`COST_L0_RANGE_KM`]: log-spaced coarse grid,
/// then golden section in `ln L0` around the best local minima.
pub fn minimize_cost(
    template: &CodeSpec,
    bounds: &[ParamBounds],
    scenario: &RepeaterScenario,
    model: BoundModel,
    settings: &OptimizerSettings,
) -> Result<CostPoint> {
    let (lo, hi) = cost_window(scenario)?;
    let inner = settings.serial();
    let neg = |u: f64| -> (f64, Option<CodeSpec>) {
        match log_cost_at(u.exp(), template, bounds, scenario, model, &inner) {
            Ok((lc, spec)) if lc.is_finite() => (-lc, Some(spec)),
            _ => (f64::NEG_INFINITY, None),
        }
    };
    let us = linspace(lo.ln(), hi.ln(), COST_COARSE_POINTS);
    let vals = par::map(settings.execution, &us, |&u| neg(u));
    let mut candidates: Vec<((f64, Option<CodeSpec>), f64)> = Vec::new();
    for i in top_local_maxima(
        &vals.iter().map(|v| v.0).collect::<Vec<_>>(),
        settings.refine_peaks,
    ) {
        let a = us[i.saturating_sub(1)];
        let b = us[(i + 1).min(us.len() - 1)];
        let (u, v) = golden_max(&neg, a, b, us[i], vals[i].clone(), 1e-6);
        candidates.push((v, u));
    }
    candidates.extend(vals.into_iter().zip(us));
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    match pick_max(candidates.into_iter()) {
        Some(((v, Some(spec)), u)) => Ok(CostPoint {
            l0_km: u.exp(),
            cost: (-v).exp(),
            spec,
        }),
        _ => Err(Error::NoKey),
    }
}

/// Elementary distance above the cost minimum at which `C'` reaches
/// `target`, by bisection to [`L0_RESOLUTION_KM`].
pub fn find_l0_for_cost(
    target: f64,
    template: &CodeSpec,
    bounds: &[ParamBounds],
    scenario: &RepeaterScenario,
    model: BoundModel,
    settings: &OptimizerSettings,
) -> Result<f64> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::Domain(format!("target cost {target}")));
    }
    let opt = minimize_cost(template, bounds, scenario, model, settings)?;
    if target < opt.cost {
        return Err(Error::BelowMinimum {
            target,
            minimum: opt.cost,
        });
    }
    let (_, l0_max) = cost_window(scenario)?;
    let inner = settings.serial();
    let above = |l0: f64| -> Result<bool> {
        let (lc, _) = log_cost_at(l0, template, bounds, scenario, model, &inner)?;
        Ok(lc >= target.ln())
    };
    if !above(l0_max)? {
        return Err(Error::Domain(format!(
            "cost stays below {target:.3e} up to L0 = {l0_max} km"
        )));
    }
    let (mut lo, mut hi) = (opt.l0_km, l0_max);
    while hi - lo > L0_RESOLUTION_KM {
        let mid = 0.5 * (lo + hi);
        if above(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Repetition time that puts `C'(L0)` exactly at `target`; `C'` is linear in
/// `t0`.
pub fn calibrate_t0(
    target: f64,
    l0_km: f64,
    template: &CodeSpec,
    bounds: &[ParamBounds],
    scenario: &RepeaterScenario,
    model: BoundModel,
    settings: &OptimizerSettings,
) -> Result<f64> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::Domain(format!("target cost {target}")));
    }
    let point = cost_at(l0_km, template, bounds, scenario, model, settings)?;
    if !point.cost.is_finite() {
        return Err(Error::NoKey);
    }
    Ok(scenario.t0_s * target / point.cost)
}
