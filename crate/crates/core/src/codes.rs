//! Codeword construction for the four code families.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use statrs::function::factorial::binomial;

use crate::error::{Error, Result};
use crate::fock::{self, FockVector, DEFAULT_CUTOFF};

/// Extra Fock levels used while exponentiating squeezed primitives, so the
/// truncated generators do not distort the retained levels.
const PRIMITIVE_PADDING: usize = 40;

/// Minimum relative weight each of the even/odd rotation classes must carry
/// for a primitive to define two distinct codewords.
const SUPPORT_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Cat,
    SqueezedCat,
    Binomial,
    GkpLike,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Cat,
        Family::SqueezedCat,
        Family::Binomial,
        Family::GkpLike,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Cat => "cat",
            Family::SqueezedCat => "squeezed_cat",
            Family::Binomial => "binomial",
            Family::GkpLike => "gkp_like",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown code family `{s}`")))
    }
}

/// A code family together with exactly the parameters it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    pub family: Family,
    /// Rotation order `M`.
    pub m: usize,
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub k: Option<usize>,
    pub delta: Option<f64>,
    pub cutoff: usize,
}

impl CodeSpec {
    pub fn cat(m: usize, alpha: f64) -> Self {
        Self {
            family: Family::Cat,
            m,
            alpha: Some(alpha),
            r: None,
            k: None,
            delta: None,
            cutoff: DEFAULT_CUTOFF,
        }
    }

    pub fn squeezed_cat(m: usize, alpha: f64, r: f64) -> Self {
        Self {
            family: Family::SqueezedCat,
            r: Some(r),
            ..Self::cat(m, alpha)
        }
    }

    pub fn binomial(m: usize, k: usize) -> Self {
        Self {
            family: Family::Binomial,
            m,
            alpha: None,
            r: None,
            k: Some(k),
            delta: None,
            cutoff: DEFAULT_CUTOFF,
        }
    }

    pub fn gkp_like(m: usize, alpha: f64, delta: f64) -> Self {
        Self {
            family: Family::GkpLike,
            delta: Some(delta),
            ..Self::cat(m, alpha)
        }
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// Number of photon losses the code is run against, `M - 1`.
    pub fn loss_order(&self) -> usize {
        self.m.saturating_sub(1)
    }

    /// Mean photon number `K M / 2` of a binomial codeword; `None` for other
    /// families.
    pub fn binomial_mean_photons(&self) -> Option<f64> {
        self.k.map(|k| (k * self.m) as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.m < 1 {
            return bad("rotation order M must be positive".into());
        }
        if self.cutoff < 1 {
            return bad("cutoff must be at least 1".into());
        }
        let uses_alpha = self.family != Family::Binomial;
        let uses_r = self.family == Family::SqueezedCat;
        let uses_k = self.family == Family::Binomial;
        let uses_delta = self.family == Family::GkpLike;
        for (name, set, used) in [
            ("alpha", self.alpha.is_some(), uses_alpha),
            ("r", self.r.is_some(), uses_r),
            ("K", self.k.is_some(), uses_k),
            ("delta", self.delta.is_some(), uses_delta),
        ] {
            if set != used {
                let verb = if used { "requires" } else { "does not take" };
                return bad(format!("family {} {verb} parameter {name}", self.family));
            }
        }
        if let Some(alpha) = self.alpha {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return bad(format!("alpha must be finite and nonnegative, got {alpha}"));
            }
        }
        if let Some(r) = self.r {
            if !(r.is_finite() && r >= 0.0) {
                return bad(format!("r must be finite and nonnegative, got {r}"));
            }
        }
        if let Some(k) = self.k {
            if k < 1 {
                return bad("K must be at least 1".into());
            }
        }
        if let Some(delta) = self.delta {
            if !(delta.is_finite() && delta > 0.0) {
                return bad(format!("delta must be finite and positive, got {delta}"));
            }
        }
        Ok(())
    }
}

/// Normalized logical codewords of one code.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordPair {
    pub zero: FockVector,
    pub one: FockVector,
    /// Factor that normalized the assembled `|0>` sum.
    pub norm_constant: f64,
    pub spec: CodeSpec,
}

/// Unnormalized primitive state `|Theta>` of a rotation-built code.
pub fn build_primitive(spec: &CodeSpec) -> Result<FockVector> {
    spec.validate()?;
    let cutoff = spec.cutoff;
    let alpha = C64::new(spec.alpha.unwrap_or(0.0), 0.0);
    let v = match spec.family {
        Family::Binomial => return Err(Error::UnsupportedPrimitive),
        Family::Cat => fock::coherent_state(alpha, cutoff)?,
        Family::SqueezedCat => squeezed_coherent(alpha, spec.r.unwrap_or(0.0), cutoff)?,
        Family::GkpLike => {
            let d2a2 = (spec.delta.unwrap_or(1.0) * alpha.re).powi(2);
            // Only the superposition needs to fit; the far term alone may not.
            let near = fock::coherent_amplitudes(alpha, cutoff);
            let far = fock::coherent_amplitudes(alpha * 2.0, cutoff);
            let mut v = near.scaled(C64::new((-d2a2).exp(), 0.0));
            v.add_scaled(C64::new((-4.0 * d2a2).exp(), 0.0), &far);
            v
        }
    };
    v.ensure_tail()?;
    Ok(v)
}

/// `D(alpha) S(r) |0>` with `S(r) = exp(r/2 (a^dag^2 - a^2))`. For `r > 0`
/// the primitive is squeezed along the rotation direction, which is what
/// shrinks the overlap between rotated copies. Computed on a padded space and
/// truncated.
fn squeezed_coherent(alpha: C64, r: f64, cutoff: usize) -> Result<FockVector> {
    if r.abs() > 2.0 {
        return Err(Error::Domain(format!(
            "squeezing parameter {r} outside |r| <= 2"
        )));
    }
    let padded = cutoff + PRIMITIVE_PADDING;
    let dim = (padded + 1) as f64;
    let vac = fock::basis_state(0, padded)?;
    let squeezed = fock::exp_apply(fock::squeezing_generator(r), r.abs() * dim, &vac);
    let displaced = fock::exp_apply(
        fock::displacement_generator(alpha),
        2.0 * alpha.norm() * dim.sqrt(),
        &squeezed,
    );
    // Weight that the padded levels carry is lost to truncation; it must be
    // as negligible as the top-level tail itself.
    let kept = displaced.resized(cutoff);
    let lost = displaced.norm_sqr() - kept.norm_sqr();
    if lost >= fock::TAIL_TOLERANCE {
        return Err(Error::CutoffTooSmall { cutoff, tail: lost });
    }
    Ok(kept)
}

/// `sum_k R(phase0 + 2 k pi / M) |v>`.
fn rotation_sum(v: &FockVector, m: usize, phase0: f64) -> FockVector {
    let mut acc = FockVector::zeros(v.cutoff());
    for k in 0..m {
        let theta = phase0 + 2.0 * PI * k as f64 / m as f64;
        acc.add_scaled(C64::new(1.0, 0.0), &fock::rotate(v, theta));
    }
    acc
}

pub fn build_codewords(spec: &CodeSpec) -> Result<CodewordPair> {
    spec.validate()?;
    if spec.family == Family::Binomial {
        return binomial_codewords(spec);
    }
    let prim = build_primitive(spec)?;
    let m = spec.m;
    let class_weight = |parity: usize| -> f64 {
        prim.amplitudes()
            .iter()
            .enumerate()
            .filter(|(n, _)| n % m == 0 && (n / m) % 2 == parity)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    };
    let total = prim.norm_sqr();
    for (parity, label) in [(0, "2kM"), (1, "(2k+1)M")] {
        if class_weight(parity) <= SUPPORT_FLOOR * total {
            return Err(Error::DegenerateCode(format!(
                "primitive has no weight on Fock states |{label}>"
            )));
        }
    }
    let zero_sum = rotation_sum(&prim, m, 0.0);
    let one_sum = rotation_sum(&prim, m, PI / m as f64);
    let norm = zero_sum.norm();
    Ok(CodewordPair {
        zero: zero_sum.normalized()?,
        one: one_sum.normalized()?,
        norm_constant: 1.0 / norm,
        spec: spec.clone(),
    })
}

fn binomial_codewords(spec: &CodeSpec) -> Result<CodewordPair> {
    let (m, k_max) = (spec.m, spec.k.unwrap_or(1));
    if k_max * m > spec.cutoff {
        return Err(Error::CutoffTooSmall {
            cutoff: spec.cutoff,
            tail: 0.5f64.powi(k_max as i32),
        });
    }
    let scale = 0.5f64.powf(k_max as f64 / 2.0);
    let mut zero = FockVector::zeros(spec.cutoff);
    let mut one = FockVector::zeros(spec.cutoff);
    for k in 0..=k_max {
        let amp = binomial(k_max as u64, k as u64).sqrt() * scale;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        zero.amplitudes_mut()[k * m] = C64::new(amp, 0.0);
        one.amplitudes_mut()[k * m] = C64::new(sign * amp, 0.0);
    }
    let norm = zero.norm();
    Ok(CodewordPair {
        zero: zero.normalized()?,
        one: one.normalized()?,
        norm_constant: 1.0 / norm,
        spec: spec.clone(),
    })
}

/// `<zero|one>`.
pub fn codeword_overlap(pair: &CodewordPair) -> C64 {
    pair.zero.inner(&pair.one)
}

/// Mean photon number of the `|0>` codeword.
pub fn mean_photon_of_code(spec: &CodeSpec) -> Result<f64> {
    let pair = build_codewords(spec)?;
    fock::mean_photon_number(&pair.zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::rotate;

    fn max_diff(a: &FockVector, b: &FockVector) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("kat".parse::<Family>().is_err());
    }

    #[test]
    fn spec_rejects_foreign_parameters() {
        let mut spec = CodeSpec::binomial(2, 2);
        spec.r = Some(0.1);
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
        let mut spec = CodeSpec::cat(2, 1.0);
        spec.alpha = None;
        assert!(spec.validate().is_err());
        assert!(CodeSpec::gkp_like(2, 1.0, 0.0).validate().is_err());
        assert_eq!(CodeSpec::binomial(8, 3).loss_order(), 7);
    }

    #[test]
    fn cat_primitive_is_coherent_state() {
        let p = build_primitive(&CodeSpec::cat(2, 1.0)).unwrap();
        for n in 0..=20 {
            let want = (-0.5f64).exp() / factorial(n).sqrt();
            assert!((p.amplitude(n).re - want).abs() < 1e-14);
        }
    }

    #[test]
    fn unsqueezed_primitive_reduces_to_cat() {
        let cat = build_primitive(&CodeSpec::cat(2, 1.0)).unwrap();
        let sq = build_primitive(&CodeSpec::squeezed_cat(2, 1.0, 0.0)).unwrap();
        assert!(max_diff(&cat, &sq) < 1e-12);
        let cat = build_codewords(&CodeSpec::cat(2, 1.0)).unwrap();
        let sq = build_codewords(&CodeSpec::squeezed_cat(2, 1.0, 0.0)).unwrap();
        assert!(max_diff(&cat.zero, &sq.zero) < 1e-12);
        assert!(max_diff(&cat.one, &sq.one) < 1e-12);
    }

    #[test]
    fn gkp_like_far_term_weight() {
        let (alpha, delta) = (1.0, 2.0);
        let gkp = build_primitive(&CodeSpec::gkp_like(2, alpha, delta)).unwrap();
        let coh = fock::coherent_state(C64::new(alpha, 0.0), 40).unwrap();
        let ratio = (-3.0 * delta * delta * alpha * alpha).exp();
        assert!((ratio - 6.144e-6).abs() < 1e-8);
        let near = (-(delta * alpha).powi(2)).exp();
        let direct = gkp.scaled(C64::new(1.0 / near, 0.0));
        assert!(max_diff(&direct, &coh) < 2.0 * ratio);
    }

    #[test]
    fn binomial_one_loss_words() {
        let pair = build_codewords(&CodeSpec::binomial(2, 1)).unwrap();
        let h = 0.5f64.sqrt();
        assert!((pair.zero.amplitude(0).re - h).abs() < 1e-15);
        assert!((pair.zero.amplitude(2).re - h).abs() < 1e-15);
        assert!((pair.one.amplitude(0).re - h).abs() < 1e-15);
        assert!((pair.one.amplitude(2).re + h).abs() < 1e-15);
    }

    #[test]
    fn binomial_needs_room() {
        assert!(matches!(
            build_codewords(&CodeSpec::binomial(8, 7).with_cutoff(40)),
            Err(Error::CutoffTooSmall { .. })
        ));
        assert!(build_codewords(&CodeSpec::binomial(8, 5).with_cutoff(40)).is_ok());
    }

    #[test]
    fn cat_overlap_matches_direct_sum() {
        let pair = build_codewords(&CodeSpec::cat(2, 2.0)).unwrap();
        let c = fock::coherent_state(C64::new(2.0, 0.0), 40).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..=20 {
            let w = c.amplitude(2 * j).norm_sqr();
            num += if j % 2 == 0 { w } else { -w };
            den += w;
        }
        assert!((codeword_overlap(&pair).re - num / den).abs() < 1e-12);
        for n in (1..=40).step_by(2) {
            assert!(pair.zero.amplitude(n).norm() < 1e-10);
        }
    }

    #[test]
    fn overlaps() {
        for m in [2, 4, 8] {
            for k in 1..=10 {
                let pair = build_codewords(&CodeSpec::binomial(m, k).with_cutoff(80)).unwrap();
                assert!(codeword_overlap(&pair).norm() < 1e-10);
            }
        }
        // With both words built from rotations of the same coherent state the
        // overlap is cos(a^2)/cosh(a^2): small, but only ~2 e^{-a^2}.
        let pair = build_codewords(&CodeSpec::cat(2, 3.0)).unwrap();
        let exact = 9f64.cos() / 9f64.cosh();
        assert!((codeword_overlap(&pair).re - exact).abs() < 1e-12);
        assert!(codeword_overlap(&pair).norm() < 3e-4);
        let mut same = pair.clone();
        same.one = same.zero.clone();
        assert!((codeword_overlap(&same).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_photons() {
        assert!((mean_photon_of_code(&CodeSpec::binomial(2, 2)).unwrap() - 2.0).abs() < 1e-12);
        assert!((mean_photon_of_code(&CodeSpec::binomial(2, 1)).unwrap() - 1.0).abs() < 1e-12);
        assert!(mean_photon_of_code(&CodeSpec::cat(2, 0.01)).unwrap() < 1e-6);
        assert_eq!(CodeSpec::binomial(2, 2).binomial_mean_photons(), Some(2.0));
    }

    #[test]
    fn vacuum_primitive_is_degenerate() {
        assert!(matches!(
            build_codewords(&CodeSpec::cat(2, 0.0)),
            Err(Error::DegenerateCode(_))
        ));
    }

    #[test]
    fn rotation_properties_all_families() {
        let specs = [
            CodeSpec::cat(2, 1.3),
            CodeSpec::cat(4, 2.0),
            CodeSpec::squeezed_cat(2, 1.2, 0.1),
            CodeSpec::binomial(4, 3),
            CodeSpec::gkp_like(2, 1.1, 0.5),
        ];
        for spec in specs {
            let pair = build_codewords(&spec).unwrap();
            let m = spec.m as f64;
            assert!(pair.zero.is_normalized() && pair.one.is_normalized());
            assert!(max_diff(&rotate(&pair.zero, 2.0 * PI / m), &pair.zero) < 1e-9);
            assert!(max_diff(&rotate(&pair.one, 2.0 * PI / m), &pair.one) < 1e-9);
            assert!(max_diff(&rotate(&pair.zero, PI / m), &pair.one) < 1e-9);
            for n in 0..=spec.cutoff {
                let (z, o) = (pair.zero.amplitude(n), pair.one.amplitude(n));
                if n % spec.m != 0 {
                    assert!(z.norm() < 1e-10 && o.norm() < 1e-10);
                } else {
                    let sign = if (n / spec.m) % 2 == 0 { 1.0 } else { -1.0 };
                    assert!((o - z * sign).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn gkp_like_converges_to_cat() {
        // The far-term weight is e^{-3 delta^2 alpha^2}, so convergence at
        // delta = 2 needs alpha >~ 0.9.
        for alpha in [0.9, 1.0, 1.5, 2.0] {
            let cat = build_codewords(&CodeSpec::cat(2, alpha)).unwrap();
            let gkp = build_codewords(&CodeSpec::gkp_like(2, alpha, 2.0)).unwrap();
            let mut diff = gkp.zero.clone();
            diff.add_scaled(C64::new(-1.0, 0.0), &cat.zero);
            assert!(diff.norm() < 1e-4, "alpha = {alpha}: {}", diff.norm());
        }
    }
}
