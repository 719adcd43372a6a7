//! Flat `key = value` run configuration.
//!
//! ```text
//! # 1-loss cat code over a 500 km chain
//! family = cat
//! M = 2
//! alpha = 1.2
//! L_tot = 500
//! L0 = 0.4
//! grid.alpha = 0.8:2.0:0.1     # min:max:step, or a comma list
//! optimize.alpha = 0.05:3      # lo:hi
//! ```
//!
//! Unknown keys, duplicate keys, malformed values and out-of-range values are
//! errors that name the offending key.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rsbc_core::codes::{CodeSpec, Family};
use rsbc_core::fock::DEFAULT_CUTOFF;
use rsbc_core::metrics::{BoundModel, Composition, RepeaterScenario, SecretFraction};
use rsbc_core::par::Execution;
use rsbc_core::sweep::{Axis, Grid, OptimizerSettings, Param, ParamBounds, DEFAULT_N_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Codewords,
    Link,
    Sweep,
    Optimize,
    Resources,
    Cost,
    Bounds,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Codewords => "codewords",
            Command::Link => "link",
            Command::Sweep => "sweep",
            Command::Optimize => "optimize",
            Command::Resources => "resources",
            Command::Cost => "cost",
            Command::Bounds => "bounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn key(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "config key `{k}`: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

const SCALAR_KEYS: &[&str] = &[
    "family",
    "M",
    "alpha",
    "r",
    "K",
    "nbar",
    "delta",
    "cutoff",
    "attenuation_db_per_km",
    "L_tot",
    "L0",
    "n_links",
    "t0",
    "N_s",
    "composition",
    "secret_fraction",
    "bound_model",
    "target_skr",
    "n_max",
    "target_cost",
    "calibrate_L0",
    "coarse_points",
    "refine_peaks",
    "tolerance",
    "execution",
];

const ALPHA_RANGE: (f64, f64) = (0.0, 3.0);
const R_RANGE: (f64, f64) = (0.0, 0.2);
const DELTA_RANGE: (f64, f64) = (0.0, 2.0);
const K_RANGE: (usize, usize) = (1, 10);

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub spec: CodeSpec,
    /// Chain template; `L0` is a placeholder for `bounds` and `cost`, which
    /// set it per point.
    pub scenario: Option<RepeaterScenario>,
    pub model: BoundModel,
    pub axes: Vec<Axis>,
    /// Optimized code parameters, outermost first.
    pub bounds: Vec<ParamBounds>,
    pub settings: OptimizerSettings,
    pub target_skr: Option<f64>,
    pub n_max: usize,
    pub target_cost: Option<f64>,
    pub calibrate_l0: Option<f64>,
    /// Every setting with defaults applied, for provenance and hashing.
    pub echo: BTreeMap<String, String>,
}

impl RunConfig {
    /// Canonical `key = value` text; identical settings give identical text.
    pub fn canonical_text(&self) -> String {
        let mut out = format!("command = {}\n", self.command.as_str());
        for (k, v) in &self.echo {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

/// Raw entries in file order.
fn tokenize(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::general(format!(
                "line {}: expected `key = value`, got {line:?}",
                i + 1
            )));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::general(format!("line {}: empty key", i + 1)));
        }
        if entries.iter().any(|(seen, _)| seen == k) {
            return Err(ConfigError::key(k, "given more than once"));
        }
        entries.push((k.to_string(), v.to_string()));
    }
    Ok(entries)
}

fn parse_value<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| ConfigError::key(key, format!("expected {what}, got {value:?}")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let x: f64 = parse_value(key, value, "a number")?;
    if !x.is_finite() {
        return Err(ConfigError::key(key, "must be finite"));
    }
    Ok(x)
}

fn parse_named<T: FromStr>(key: &str, value: &str, names: &[&str]) -> Result<T> {
    value.parse().map_err(|_| {
        ConfigError::key(
            key,
            format!(
                "unknown value {value:?}; expected one of {}",
                names.join(", ")
            ),
        )
    })
}

fn parse_grid(key: &str, value: &str) -> Result<Grid> {
    let grid = if value.contains(':') {
        let parts: Vec<&str> = value.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(ConfigError::key(key, "range grids are `min:max:step`"));
        }
        Grid::Range {
            min: parse_f64(key, parts[0])?,
            max: parse_f64(key, parts[1])?,
            step: parse_f64(key, parts[2])?,
        }
    } else {
        Grid::List(
            value
                .split(',')
                .map(|p| parse_f64(key, p.trim()))
                .collect::<Result<_>>()?,
        )
    };
    grid.points()
        .map_err(|e| ConfigError::key(key, e.to_string()))?;
    Ok(grid)
}

fn parse_bounds(key: &str, param: Param, value: &str) -> Result<ParamBounds> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(ConfigError::key(key, "optimization bounds are `lo:hi`"));
    }
    Ok(ParamBounds::new(
        param,
        parse_f64(key, parts[0])?,
        parse_f64(key, parts[1])?,
    ))
}

/// Physical range of a code parameter value.
fn guard(key: &str, param: Param, x: f64, m: usize) -> Result<()> {
    let within =
        |(lo, hi): (f64, f64), open_lo: bool| (if open_lo { x > lo } else { x >= lo }) && x <= hi;
    let ok = match param {
        Param::Alpha => within(ALPHA_RANGE, true),
        Param::R => within(R_RANGE, false),
        Param::Delta => within(DELTA_RANGE, true),
        Param::K => x.fract() == 0.0 && within((K_RANGE.0 as f64, K_RANGE.1 as f64), false),
        Param::NBar => {
            let k = 2.0 * x / m as f64;
            k.fract() == 0.0 && (K_RANGE.0 as f64..=K_RANGE.1 as f64).contains(&k)
        }
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        let range = match param {
            Param::Alpha => "(0, 3]".to_string(),
            Param::R => "[0, 0.2]".to_string(),
            Param::Delta => "(0, 2]".to_string(),
            Param::K => "integers in [1, 10]".to_string(),
            _ => format!("K M / 2 with integer K in [1, 10] (M = {m})"),
        };
        Err(ConfigError::key(key, format!("{x} outside {range}")))
    }
}

fn uses(family: Family, param: Param) -> bool {
    match param {
        Param::Alpha => family != Family::Binomial,
        Param::R => family == Family::SqueezedCat,
        Param::Delta => family == Family::GkpLike,
        Param::K | Param::NBar => family == Family::Binomial,
        _ => true,
    }
}

pub fn parse_config(text: &str, command: Command) -> Result<RunConfig> {
    let entries = tokenize(text)?;
    let mut scalars: BTreeMap<&str, &str> = BTreeMap::new();
    let mut grids: Vec<(String, Param, &str)> = Vec::new();
    let mut optimized: Vec<(String, Param, &str)> = Vec::new();
    for (k, v) in &entries {
        if let Some(name) = k.strip_prefix("grid.") {
            let p = name
                .parse::<Param>()
                .map_err(|_| ConfigError::key(k, "unknown grid parameter"))?;
            grids.push((k.clone(), p, v));
        } else if let Some(name) = k.strip_prefix("optimize.") {
            let p = name
                .parse::<Param>()
                .ok()
                .filter(|p| p.is_code_param())
                .ok_or_else(|| ConfigError::key(k, "only code parameters can be optimized"))?;
            optimized.push((k.clone(), p, v));
        } else if SCALAR_KEYS.contains(&k.as_str()) {
            scalars.insert(k, v);
        } else {
            return Err(ConfigError::key(k, "unknown key"));
        }
    }
    let mut echo: BTreeMap<String, String> = BTreeMap::new();
    let mut take = |key: &str, default: Option<&str>| -> Option<String> {
        let v = scalars
            .get(key)
            .map(|s| s.to_string())
            .or(default.map(String::from));
        if let Some(v) = &v {
            echo.insert(key.to_string(), v.clone());
        }
        v
    };

    // Code.
    let family_text = take("family", None).ok_or_else(|| ConfigError::key("family", "missing"))?;
    let family: Family = parse_named(
        "family",
        &family_text,
        &Family::ALL.iter().map(|x| x.as_str()).collect::<Vec<_>>(),
    )?;
    let m_text = take("M", None).ok_or_else(|| ConfigError::key("M", "missing"))?;
    let m: usize = parse_value("M", &m_text, "a positive integer")?;
    if !m.is_power_of_two() {
        return Err(ConfigError::key(
            "M",
            "rotation order must be a power of two",
        ));
    }
    let default_cutoff = DEFAULT_CUTOFF.to_string();
    let cutoff: usize = parse_value(
        "cutoff",
        &take("cutoff", Some(&default_cutoff)).unwrap(),
        "a positive integer",
    )?;
    if cutoff < 1 {
        return Err(ConfigError::key("cutoff", "must be at least 1"));
    }

    let swept_or_optimized = |p: Param| {
        grids
            .iter()
            .find(|g| g.1 == p)
            .map(|g| g.0.clone())
            .or_else(|| optimized.iter().find(|o| o.1 == p).map(|o| o.0.clone()))
    };
    for (key, p, _) in grids.iter().chain(&optimized) {
        if p.is_code_param() && !uses(family, *p) {
            return Err(ConfigError::key(
                key,
                format!("family {family} has no parameter {p}"),
            ));
        }
    }

    let mut code_value = |key: &str, param: Param| -> Result<Option<f64>> {
        let given = take(key, None);
        if !uses(family, param) {
            return match given {
                Some(_) => Err(ConfigError::key(
                    key,
                    format!("family {family} does not take {key}"),
                )),
                None => Ok(None),
            };
        }
        match given {
            Some(v) => {
                let x = parse_f64(key, &v)?;
                guard(key, param, x, m)?;
                Ok(Some(x))
            }
            None => Ok(None),
        }
    };
    let alpha = code_value("alpha", Param::Alpha)?;
    let r = code_value("r", Param::R)?;
    let delta = code_value("delta", Param::Delta)?;
    let k = code_value("K", Param::K)?;
    let nbar = code_value("nbar", Param::NBar)?;
    if k.is_some() && nbar.is_some() {
        return Err(ConfigError::key("nbar", "give either K or nbar, not both"));
    }
    let k = k.or(nbar.map(|n| 2.0 * n / m as f64)).map(|k| k as usize);

    // Parameters that are swept or optimized need no scalar value; the
    // template takes a placeholder that every point overrides.
    let need = |name: &str, p: Param, v: Option<f64>, placeholder: f64| -> Result<Option<f64>> {
        if !uses(family, p) {
            return Ok(None);
        }
        match v {
            Some(x) => Ok(Some(x)),
            None if swept_or_optimized(p).is_some() => Ok(Some(placeholder)),
            None if p == Param::R => Ok(Some(0.0)),
            None => Err(ConfigError::key(
                name,
                format!("missing (required for family {family})"),
            )),
        }
    };
    let k_placeholder_swept = swept_or_optimized(Param::NBar).is_some();
    let spec = CodeSpec {
        family,
        m,
        alpha: need("alpha", Param::Alpha, alpha, 1.0)?,
        r: need("r", Param::R, r, 0.0)?,
        k: if family == Family::Binomial {
            match k {
                Some(k) => Some(k),
                None if k_placeholder_swept || swept_or_optimized(Param::K).is_some() => Some(1),
                None => {
                    return Err(ConfigError::key(
                        "K",
                        "missing (required for family binomial)",
                    ))
                }
            }
        } else {
            None
        },
        delta: need("delta", Param::Delta, delta, 1.0)?,
        cutoff,
    };
    spec.validate()
        .map_err(|e| ConfigError::key("family", e.to_string()))?;

    // Grids and bounds.
    let mut axes = Vec::new();
    for (key, p, v) in &grids {
        let grid = parse_grid(key, v)?;
        if p.is_code_param() {
            for x in grid.points().unwrap() {
                guard(key, *p, x, m)?;
            }
        }
        echo.insert(key.clone(), v.to_string());
        axes.push(Axis { param: *p, grid });
    }
    let mut bounds = Vec::new();
    for (key, p, v) in &optimized {
        let b = parse_bounds(key, *p, v)?;
        b.validate(&spec)
            .map_err(|e| ConfigError::key(key, e.to_string()))?;
        if axes.iter().any(|a| a.param == *p) {
            return Err(ConfigError::key(
                key,
                "parameter is both swept and optimized",
            ));
        }
        echo.insert(key.clone(), v.to_string());
        bounds.push(b);
    }

    // Chain.
    let mut take = |key: &str, default: Option<&str>| -> Option<String> {
        let v = scalars
            .get(key)
            .map(|s| s.to_string())
            .or(default.map(String::from));
        if let Some(v) = &v {
            echo.insert(key.to_string(), v.clone());
        }
        v
    };
    let opt_f64 = |key: &str, v: Option<String>| -> Result<Option<f64>> {
        v.map(|v| parse_f64(key, &v)).transpose()
    };
    let att = parse_f64(
        "attenuation_db_per_km",
        &take("attenuation_db_per_km", Some("0.2")).unwrap(),
    )?;
    if att < 0.0 {
        return Err(ConfigError::key(
            "attenuation_db_per_km",
            "must be nonnegative",
        ));
    }
    let t0 = parse_f64("t0", &take("t0", Some("1e-5")).unwrap())?;
    let n_s = parse_f64("N_s", &take("N_s", Some("2")).unwrap())?;
    let composition: Composition = parse_named(
        "composition",
        &take("composition", Some("phase_flip")).unwrap(),
        &Composition::ALL
            .iter()
            .map(|x| x.as_str())
            .collect::<Vec<_>>(),
    )?;
    let secret_fraction: SecretFraction = parse_named(
        "secret_fraction",
        &take("secret_fraction", Some("one_h")).unwrap(),
        &SecretFraction::ALL
            .iter()
            .map(|x| x.as_str())
            .collect::<Vec<_>>(),
    )?;
    let model: BoundModel = parse_named(
        "bound_model",
        &take("bound_model", Some("exact_proportional")).unwrap(),
        &BoundModel::ALL
            .iter()
            .map(|x| x.as_str())
            .collect::<Vec<_>>(),
    )?;
    let l_tot = opt_f64("L_tot", take("L_tot", None))?;
    let l0 = opt_f64("L0", take("L0", None))?;
    let n_links = take("n_links", None)
        .map(|v| parse_value::<usize>("n_links", &v, "a positive integer"))
        .transpose()?;

    let scenario = if command == Command::Codewords {
        for key in ["L_tot", "L0", "n_links"] {
            if scalars.contains_key(key) {
                return Err(ConfigError::key(key, "not used by the codewords command"));
            }
        }
        None
    } else {
        let grid_has = |p: Param| axes.iter().any(|a: &Axis| a.param == p);
        let l_tot = match l_tot {
            Some(l) => l,
            None if grid_has(Param::LTot) => 1.0,
            None => return Err(ConfigError::key("L_tot", "missing")),
        };
        let built = match (l0, n_links) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::key(
                    "n_links",
                    "give either L0 or n_links, not both",
                ))
            }
            (Some(l0), None) => {
                RepeaterScenario::new(l_tot, l0).map_err(|e| ConfigError::key("L0", e.to_string()))
            }
            (None, Some(n)) => RepeaterScenario::with_links(l_tot, n)
                .map_err(|e| ConfigError::key("n_links", e.to_string())),
            (None, None) => {
                let placeholder_ok = matches!(command, Command::Bounds | Command::Cost)
                    || grid_has(Param::L0)
                    || grid_has(Param::NLinks);
                if !placeholder_ok {
                    return Err(ConfigError::key("L0", "missing (or give n_links)"));
                }
                RepeaterScenario::with_links(l_tot, 1)
                    .map_err(|e| ConfigError::key("L_tot", e.to_string()))
            }
        }?;
        let scenario = RepeaterScenario {
            t0_s: t0,
            n_s,
            attenuation_db_per_km: att,
            composition,
            secret_fraction,
            ..built
        };
        scenario
            .validate()
            .map_err(|e| ConfigError::key("L_tot", e.to_string()))?;
        Some(scenario)
    };

    let target_skr = opt_f64("target_skr", take("target_skr", None))?;
    let n_max: usize = parse_value(
        "n_max",
        &take("n_max", Some(&DEFAULT_N_MAX.to_string())).unwrap(),
        "a positive integer",
    )?;
    let target_cost = opt_f64("target_cost", take("target_cost", None))?;
    let calibrate_l0 = opt_f64("calibrate_L0", take("calibrate_L0", None))?;
    let defaults = OptimizerSettings::default();
    let settings = OptimizerSettings {
        coarse_points: parse_value(
            "coarse_points",
            &take("coarse_points", Some(&defaults.coarse_points.to_string())).unwrap(),
            "an integer",
        )?,
        refine_peaks: parse_value(
            "refine_peaks",
            &take("refine_peaks", Some(&defaults.refine_peaks.to_string())).unwrap(),
            "an integer",
        )?,
        tolerance: parse_f64(
            "tolerance",
            &take("tolerance", Some(&format!("{:e}", defaults.tolerance))).unwrap(),
        )?,
        execution: match take("execution", Some("parallel")).unwrap().as_str() {
            "parallel" => Execution::Parallel,
            "serial" => Execution::Serial,
            other => {
                return Err(ConfigError::key(
                    "execution",
                    format!("unknown value {other:?}; expected parallel or serial"),
                ))
            }
        },
    };
    if settings.coarse_points < 25 {
        return Err(ConfigError::key("coarse_points", "must be at least 25"));
    }
    if settings.refine_peaks < 1 {
        return Err(ConfigError::key("refine_peaks", "must be at least 1"));
    }
    if settings.tolerance.is_nan() || settings.tolerance <= 0.0 {
        return Err(ConfigError::key("tolerance", "must be positive"));
    }

    let config = RunConfig {
        command,
        spec,
        scenario,
        model,
        axes,
        bounds,
        settings,
        target_skr,
        n_max,
        target_cost,
        calibrate_l0,
        echo,
    };
    check_command(&config)?;
    Ok(config)
}

/// Keys that only some commands accept, and keys some commands require.
fn check_command(c: &RunConfig) -> Result<()> {
    let grid_ok = matches!(c.command, Command::Sweep | Command::Bounds | Command::Cost);
    if let Some(axis) = c.axes.first() {
        if !grid_ok {
            return Err(ConfigError::key(
                &format!("grid.{}", axis.param),
                format!("grids are not used by the {} command", c.command.as_str()),
            ));
        }
    }
    match c.command {
        Command::Bounds => {
            if let Some(a) = c.axes.iter().find(|a| a.param != Param::LTot) {
                return Err(ConfigError::key(
                    &format!("grid.{}", a.param),
                    "the bounds command sweeps only L_tot",
                ));
            }
        }
        Command::Cost => {
            if let Some(a) = c.axes.iter().find(|a| a.param != Param::L0) {
                return Err(ConfigError::key(
                    &format!("grid.{}", a.param),
                    "the cost command sweeps only L0",
                ));
            }
        }
        _ => {}
    }
    if matches!(c.command, Command::Codewords | Command::Bounds) && !c.bounds.is_empty() {
        return Err(ConfigError::key(
            &format!("optimize.{}", c.bounds[0].param),
            format!("the {} command does not optimize", c.command.as_str()),
        ));
    }
    if c.command == Command::Optimize && c.bounds.is_empty() {
        return Err(ConfigError::general(
            "the optimize command needs at least one optimize.<param> key",
        ));
    }
    let require = |key: &str, v: Option<f64>| match v {
        Some(x) if x > 0.0 => Ok(()),
        Some(_) => Err(ConfigError::key(key, "must be positive")),
        None => Err(ConfigError::key(
            key,
            format!("required by the {} command", c.command.as_str()),
        )),
    };
    match c.command {
        Command::Resources => require("target_skr", c.target_skr)?,
        Command::Cost if c.calibrate_l0.is_some() => require("target_cost", c.target_cost)?,
        _ => {}
    }
    for (key, set, cmds) in [
        (
            "target_skr",
            c.target_skr.is_some(),
            &[Command::Resources][..],
        ),
        ("target_cost", c.target_cost.is_some(), &[Command::Cost][..]),
        (
            "calibrate_L0",
            c.calibrate_l0.is_some(),
            &[Command::Cost][..],
        ),
    ] {
        if set && !cmds.contains(&c.command) {
            return Err(ConfigError::key(
                key,
                format!("not used by the {} command", c.command.as_str()),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_CAT: &str = "family = cat\nM = 2\nalpha = 1.2\nL_tot = 500\nL0 = 0.4\n";

    #[test]
    fn minimal_cat_gets_defaults() {
        let c = parse_config(MINIMAL_CAT, Command::Link).unwrap();
        let s = c.scenario.as_ref().unwrap();
        assert_eq!(s.attenuation_db_per_km, 0.2);
        assert_eq!(c.spec.cutoff, 40);
        assert_eq!(s.t0_s, 1e-5);
        assert_eq!(s.n_s, 2.0);
        assert_eq!(s.composition, Composition::PhaseFlip);
        assert_eq!(s.secret_fraction, SecretFraction::OneH);
        assert_eq!(s.n_links, 1250);
        for key in [
            "attenuation_db_per_km",
            "cutoff",
            "t0",
            "N_s",
            "composition",
            "secret_fraction",
        ] {
            assert!(c.echo.contains_key(key), "{key} not echoed");
        }
    }

    #[test]
    fn misspelled_key_is_named() {
        let err = parse_config(&MINIMAL_CAT.replace("alpha", "alhpa"), Command::Link).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("alhpa"));
        assert!(err.to_string().contains("alhpa"));
    }

    #[test]
    fn foreign_parameter_is_a_guard_violation() {
        let text = "family = binomial\nM = 2\nK = 2\nr = 0.1\nL_tot = 1\nL0 = 1\n";
        let err = parse_config(text, Command::Link).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("r"));
    }

    #[test]
    fn out_of_range_values_rejected() {
        for (from, to, key) in [
            ("alpha = 1.2", "alpha = 3.5", "alpha"),
            ("alpha = 1.2", "alpha = x", "alpha"),
            ("M = 2", "M = 3", "M"),
            ("L0 = 0.4", "L0 = 600", "L0"),
        ] {
            let err = parse_config(&MINIMAL_CAT.replace(from, to), Command::Link).unwrap_err();
            assert_eq!(err.key.as_deref(), Some(key), "{to}");
        }
    }

    #[test]
    fn duplicates_and_syntax() {
        let err = parse_config(&format!("{MINIMAL_CAT}alpha = 1\n"), Command::Link).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("alpha"));
        assert!(parse_config(&format!("{MINIMAL_CAT}oops\n"), Command::Link).is_err());
        let commented = format!("# header\n{MINIMAL_CAT}  # trailing\n\ncutoff = 50 # inline\n");
        assert_eq!(
            parse_config(&commented, Command::Link).unwrap().spec.cutoff,
            50
        );
    }

    #[test]
    fn grids_and_bounds() {
        let text = format!("{MINIMAL_CAT}grid.L0 = 0.4, 0.6\noptimize.alpha = 0.05:3\n");
        let c = parse_config(&text, Command::Sweep).unwrap();
        assert_eq!(c.axes.len(), 1);
        assert_eq!(c.bounds, vec![ParamBounds::new(Param::Alpha, 0.05, 3.0)]);
        assert!(parse_config(&text, Command::Link).is_err());
        let bad = format!("{MINIMAL_CAT}optimize.alpha = 0:3\n");
        assert_eq!(
            parse_config(&bad, Command::Optimize)
                .unwrap_err()
                .key
                .as_deref(),
            Some("optimize.alpha")
        );
    }

    #[test]
    fn swept_parameter_needs_no_scalar() {
        let text = "family = binomial\nM = 2\nL_tot = 500\nL0 = 1\ngrid.K = 1:4:1\n";
        let c = parse_config(text, Command::Sweep).unwrap();
        assert_eq!(c.spec.k, Some(1));
        let text = "family = binomial\nM = 2\nL_tot = 500\nL0 = 1\n";
        assert_eq!(
            parse_config(text, Command::Link)
                .unwrap_err()
                .key
                .as_deref(),
            Some("K")
        );
    }

    #[test]
    fn canonical_text_ignores_layout() {
        let a = parse_config(MINIMAL_CAT, Command::Link).unwrap();
        let shuffled = "L0=0.4\n# c\nL_tot = 500\nalpha=1.2\nM = 2\nfamily = cat\nt0 = 1e-5\n";
        let b = parse_config(shuffled, Command::Link).unwrap();
        assert_eq!(a.canonical_text(), b.canonical_text());
    }
}
