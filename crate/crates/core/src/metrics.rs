//! Link and chain figures of merit.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::channel::{
    self, bell_phi, bell_psi, branch_phase, transmissivity, LossChannel, UsdMeasurement,
    DEFAULT_ATTENUATION_DB_PER_KM,
};
use crate::codes::{build_codewords, CodeSpec, CodewordPair, Family};
use crate::error::{Error, Result};

pub const DEFAULT_T0_S: f64 = 1e-5;
pub const DEFAULT_N_S: f64 = 2.0;

/// How link fidelities combine along the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Composition {
    /// Independent phase flips: `(1 + (2 F0 - 1)^n) / 2`.
    PhaseFlip,
    /// `F0^n`.
    Product,
}

/// Secret fraction: `1 - h(F)` or `1 - 2 h(F)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecretFraction {
    OneH,
    TwoH,
}

/// Treatment of Kraus branches beyond the leading one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundModel {
    /// All branches proportional to the leading one (exact for cat codes).
    ExactProportional,
    /// Non-leading branches replaced by identity noise.
    WorstCase,
    /// Overlap-weighted split between the two.
    OverlapBound,
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $ty::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| Error::InvalidSpec(format!(
                        "unknown {} `{s}`", stringify!($ty)
                    )))
            }
        }
    };
}

named_enum!(Composition { PhaseFlip => "phase_flip", Product => "product" });
named_enum!(SecretFraction { OneH => "one_h", TwoH => "two_h" });
named_enum!(BoundModel {
    ExactProportional => "exact_proportional",
    WorstCase => "worst_case",
    OverlapBound => "overlap_bound",
});

/// Annotations carried by a [`MetricRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    /// Proportional folding applied to a non-cat code.
    UpperBound,
    /// `F0 < 1/2` was raised to `1/2` before phase-flip composition.
    FidelityClamped,
    /// The chain fidelity is at or below `1/2`; no key.
    NoKey,
    /// The point could not be evaluated; carries the error text.
    Failed(String),
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::UpperBound => f.write_str("upper_bound"),
            Flag::FidelityClamped => f.write_str("f0_clamped"),
            Flag::NoKey => f.write_str("no_key"),
            Flag::Failed(msg) => write!(f, "error: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeaterScenario {
    pub l_tot_km: f64,
    pub l0_km: f64,
    pub n_links: usize,
    pub t0_s: f64,
    pub n_s: f64,
    pub attenuation_db_per_km: f64,
    pub composition: Composition,
    pub secret_fraction: SecretFraction,
}

impl RepeaterScenario {
    /// `n_links = round(L_tot / L0)`.
    pub fn new(l_tot_km: f64, l0_km: f64) -> Result<Self> {
        if !(l0_km.is_finite() && l0_km > 0.0) {
            return Err(Error::Domain(format!("elementary distance {l0_km} km")));
        }
        let n = (l_tot_km / l0_km).round();
        if !(n.is_finite() && n >= 1.0) {
            return Err(Error::Domain(format!(
                "L_tot = {l_tot_km} km and L0 = {l0_km} km give no whole link"
            )));
        }
        let s = Self {
            l_tot_km,
            l0_km,
            n_links: n as usize,
            ..Self::defaults()
        };
        s.validate()?;
        Ok(s)
    }

    /// `L0 = L_tot / n`, no rounding.
    pub fn with_links(l_tot_km: f64, n_links: usize) -> Result<Self> {
        let s = Self {
            l_tot_km,
            l0_km: l_tot_km / n_links as f64,
            n_links,
            ..Self::defaults()
        };
        s.validate()?;
        Ok(s)
    }

    fn defaults() -> Self {
        Self {
            l_tot_km: 0.0,
            l0_km: 0.0,
            n_links: 1,
            t0_s: DEFAULT_T0_S,
            n_s: DEFAULT_N_S,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            composition: Composition::PhaseFlip,
            secret_fraction: SecretFraction::OneH,
        }
    }

    /// Same settings at a different elementary distance.
    pub fn at_l0(&self, l0_km: f64) -> Result<Self> {
        Ok(Self {
            ..Self::new(self.l_tot_km, l0_km)?.with_settings_of(self)
        })
    }

    /// Same settings with `n` links.
    pub fn at_links(&self, n_links: usize) -> Result<Self> {
        Ok(Self::with_links(self.l_tot_km, n_links)?.with_settings_of(self))
    }

    fn with_settings_of(self, other: &Self) -> Self {
        Self {
            t0_s: other.t0_s,
            n_s: other.n_s,
            attenuation_db_per_km: other.attenuation_db_per_km,
            composition: other.composition,
            secret_fraction: other.secret_fraction,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(self.l_tot_km.is_finite() && self.l_tot_km > 0.0) {
            return bad(format!("total distance {} km", self.l_tot_km));
        }
        if self.n_links < 1 {
            return bad("at least one link is required".into());
        }
        if !(self.l0_km > 0.0 && self.l0_km <= self.l_tot_km * (1.0 + 1e-12)) {
            return bad(format!(
                "elementary distance {} km must lie in (0, L_tot]",
                self.l0_km
            ));
        }
        if !(self.t0_s.is_finite() && self.t0_s > 0.0) {
            return bad(format!("repetition time {} s", self.t0_s));
        }
        if !(self.n_s.is_finite() && self.n_s >= 1.0) {
            return bad(format!("matter qubits per link {}", self.n_s));
        }
        Ok(())
    }

    pub fn eta(&self) -> Result<f64> {
        transmissivity(self.l0_km, self.attenuation_db_per_km)
    }
}

/// Per-link results, independent of the chain length.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub eta: f64,
    pub p0: f64,
    pub f0: f64,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub spec: CodeSpec,
    pub scenario: RepeaterScenario,
    pub eta: f64,
    pub p0: f64,
    pub f0: f64,
    pub p_tot: f64,
    pub f_tot: f64,
    pub skr: f64,
    pub cost_coeff: f64,
    pub bound_model: BoundModel,
    pub flags: Vec<Flag>,
}

impl MetricRecord {
    /// Placeholder for a grid point that failed: parameters kept, metrics NaN.
    pub fn failed(
        spec: CodeSpec,
        scenario: RepeaterScenario,
        bound_model: BoundModel,
        err: &Error,
    ) -> Self {
        Self {
            eta: scenario.eta().unwrap_or(f64::NAN),
            spec,
            scenario,
            p0: f64::NAN,
            f0: f64::NAN,
            p_tot: f64::NAN,
            f_tot: f64::NAN,
            skr: f64::NAN,
            cost_coeff: f64::NAN,
            bound_model,
            flags: vec![Flag::Failed(err.to_string())],
        }
    }

    pub fn is_failed(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, Flag::Failed(_)))
    }
}

/// `-p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

/// Per-syndrome discrimination and fidelity data.
#[derive(Debug, Clone, PartialEq)]
pub struct SyndromeOutcome {
    pub q: usize,
    pub probability: f64,
    /// `|<0_q|1_q>|` of the normalized damped words.
    pub overlap: f64,
    /// Fidelity after a conclusive outcome; `None` if the words coincide.
    pub fidelity: Option<f64>,
}

/// Evaluates every syndrome class of one link under the given model.
pub fn syndrome_outcomes(
    pair: &CodewordPair,
    eta: f64,
    model: BoundModel,
) -> Result<Vec<SyndromeOutcome>> {
    let m_order = pair.spec.m;
    let m = channel::order_exponent(m_order)?;
    let rho_f = channel::joint_state(pair)?.apply_loss(eta)?;
    let mut out = Vec::with_capacity(m_order);
    for q in 0..m_order {
        let (rho_sm, p) = channel::syndrome_project(&rho_f, m, q)?;
        let state = channel::entangle(&rho_sm)?;
        let usd = if p > 0.0 {
            match UsdMeasurement::for_syndrome(pair, eta, q) {
                Ok(u) => Some(u),
                Err(Error::DegenerateCode(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let Some(usd) = usd else {
            out.push(SyndromeOutcome {
                q,
                probability: p,
                overlap: 1.0,
                fidelity: None,
            });
            continue;
        };
        let modelled = match model {
            BoundModel::ExactProportional => channel::proportional_from(&state)?,
            BoundModel::WorstCase => channel::worst_case_from(&state)?,
            BoundModel::OverlapBound => {
                channel::overlap_bound_from(&state, &channel::branch_overlaps(pair, eta, q)?)?
            }
        };
        let [sigma0, sigma1] = usd.outcome_states(&modelled)?;
        let phase = branch_phase(q, m_order);
        let project = |v: &[C64], s: &nalgebra::Matrix4<C64>| -> f64 {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    acc += v[i].conj() * s[(i, j)] * v[j];
                }
            }
            acc.re
        };
        let good = project(&bell_phi(phase), &sigma0) + project(&bell_psi(phase), &sigma1);
        let total = sigma0.trace().re + sigma1.trace().re;
        out.push(SyndromeOutcome {
            q,
            probability: p,
            overlap: usd.overlap().norm(),
            fidelity: (total > 0.0).then(|| (good / total).clamp(0.0, 1.0)),
        });
    }
    Ok(out)
}

fn aggregate(outcomes: &[SyndromeOutcome]) -> Result<(f64, f64)> {
    let (mut p0, mut num) = (0.0, 0.0);
    for o in outcomes {
        if let Some(f) = o.fidelity {
            let w = o.probability * (1.0 - o.overlap);
            p0 += w;
            num += w * f;
        }
    }
    if p0 <= 0.0 {
        return Err(Error::DegenerateCode(
            "damped codewords indistinguishable for every syndrome".into(),
        ));
    }
    Ok((p0.min(1.0), num / p0))
}

/// `P0 = sum_q p_q (1 - |<0_q|1_q>|)`.
pub fn link_success_probability(pair: &CodewordPair, eta: f64) -> Result<f64> {
    Ok(aggregate(&syndrome_outcomes(
        pair,
        eta,
        BoundModel::ExactProportional,
    )?)?
    .0)
}

/// Syndrome-averaged fidelity to the phase-corrected Bell target, weighted by
/// each class's conclusive probability.
pub fn link_fidelity(pair: &CodewordPair, eta: f64, model: BoundModel) -> Result<f64> {
    Ok(link_metrics(pair, eta, model)?.f0)
}

pub fn link_metrics(pair: &CodewordPair, eta: f64, model: BoundModel) -> Result<LinkMetrics> {
    let (p0, f0) = aggregate(&syndrome_outcomes(pair, eta, model)?)?;
    let mut flags = Vec::new();
    if model == BoundModel::ExactProportional && pair.spec.family != Family::Cat {
        flags.push(Flag::UpperBound);
    }
    Ok(LinkMetrics { eta, p0, f0, flags })
}

/// `P0^n`.
pub fn total_success(p0: f64, n_links: usize) -> f64 {
    p0.powf(n_links as f64)
}

/// Chain fidelity and whether `F0` had to be clamped.
pub fn compose_fidelity(f0: f64, n_links: usize, model: Composition) -> (f64, bool) {
    match model {
        Composition::PhaseFlip => {
            let clamped = f0 < 0.5;
            let x = 2.0 * f0.max(0.5) - 1.0;
            ((1.0 + x.powf(n_links as f64)) / 2.0, clamped)
        }
        Composition::Product => (f0.powf(n_links as f64), false),
    }
}

fn secret_fraction(f_tot: f64, form: SecretFraction) -> f64 {
    if f_tot <= 0.5 {
        return 0.0;
    }
    let h = binary_entropy(f_tot.min(1.0)).unwrap_or(1.0);
    match form {
        SecretFraction::OneH => 1.0 - h,
        SecretFraction::TwoH => 1.0 - 2.0 * h,
    }
    .max(0.0)
}

/// `P_tot (1 - h(F_tot))` or `P_tot (1 - 2 h(F_tot))`, clamped at zero.
pub fn skr_lower_bound(p_tot: f64, f_tot: f64, form: SecretFraction) -> f64 {
    (p_tot * secret_fraction(f_tot, form)).max(0.0)
}

/// `ln` of the key rate, finite even where `P0^n` or the secret fraction
/// underflow; `-inf` when there is no key.
pub fn log_skr(
    p0: f64,
    f0: f64,
    n_links: usize,
    composition: Composition,
    form: SecretFraction,
) -> f64 {
    log_skr_continuous(p0, f0, n_links as f64, composition, form)
}

/// [`log_skr`] with a real-valued link count `L_tot / L0`, used where the
/// key rate must vary smoothly with the elementary distance.
pub fn log_skr_continuous(
    p0: f64,
    f0: f64,
    n: f64,
    composition: Composition,
    form: SecretFraction,
) -> f64 {
    if p0 <= 0.0 || n.is_nan() || n <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let log_fraction = match composition {
        Composition::PhaseFlip => {
            let x = 2.0 * f0.max(0.5) - 1.0;
            let ln_eps = n * x.ln();
            log_phase_flip_fraction(ln_eps, form)
        }
        Composition::Product => secret_fraction(f0.powf(n), form).ln(),
    };
    n * p0.ln() + log_fraction
}

/// `ln(1 - h((1 + eps) / 2))` (or with `2h`) from `ln eps`, using the series
/// `1 - h = sum_k eps^{2k} / (2k (2k-1) ln 2)` when `eps` is small.
fn log_phase_flip_fraction(ln_eps: f64, form: SecretFraction) -> f64 {
    let eps = ln_eps.exp();
    match form {
        SecretFraction::OneH if eps < 1e-4 => {
            2.0 * ln_eps - (2.0 * std::f64::consts::LN_2).ln() + (eps * eps / 6.0).ln_1p()
        }
        _ => secret_fraction((1.0 + eps) / 2.0, form).ln(),
    }
}

/// `C' = N_s t0 / (skr L0)`; infinite when there is no key.
pub fn cost_coefficient(skr: f64, scenario: &RepeaterScenario) -> f64 {
    if skr <= 0.0 {
        return f64::INFINITY;
    }
    scenario.n_s * scenario.t0_s / (skr * scenario.l0_km)
}

/// `ln C'` from `ln skr`.
pub fn log_cost(log_skr: f64, scenario: &RepeaterScenario) -> f64 {
    (scenario.n_s * scenario.t0_s).ln() - log_skr - scenario.l0_km.ln()
}

/// Chain-level record from per-link metrics.
pub fn compose_record(
    spec: &CodeSpec,
    scenario: &RepeaterScenario,
    link: &LinkMetrics,
    model: BoundModel,
) -> MetricRecord {
    let n = scenario.n_links;
    let p_tot = total_success(link.p0, n);
    let (f_tot, clamped) = compose_fidelity(link.f0, n, scenario.composition);
    let ln_skr = log_skr(
        link.p0,
        link.f0,
        n,
        scenario.composition,
        scenario.secret_fraction,
    );
    let mut flags = link.flags.clone();
    if clamped {
        flags.push(Flag::FidelityClamped);
    }
    if ln_skr == f64::NEG_INFINITY {
        flags.push(Flag::NoKey);
    }
    let cost = if ln_skr.is_finite() {
        log_cost(ln_skr, scenario).exp()
    } else {
        f64::INFINITY
    };
    MetricRecord {
        spec: spec.clone(),
        scenario: scenario.clone(),
        eta: link.eta,
        p0: link.p0,
        f0: link.f0,
        p_tot,
        f_tot,
        skr: if ln_skr.is_finite() {
            ln_skr.exp()
        } else {
            0.0
        },
        cost_coeff: cost,
        bound_model: model,
        flags,
    }
}

/// Full evaluation of one code at one scenario point.
pub fn evaluate(
    spec: &CodeSpec,
    scenario: &RepeaterScenario,
    model: BoundModel,
) -> Result<MetricRecord> {
    scenario.validate()?;
    let pair = build_codewords(spec)?;
    let link = link_metrics(&pair, scenario.eta()?, model)?;
    Ok(compose_record(spec, scenario, &link, model))
}
