//! Photon loss and the heralded link pipeline.
//!
//! `joint_state -> apply_loss -> syndrome_project -> entangle` produces the
//! two-atom/field state of one elementary link. States keep one record per
//! Kraus branch because every later step (even/odd split, noise replacement,
//! overlap folding) works branch by branch; dense matrices are derived views.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64 as C64;
use statrs::function::factorial::ln_binomial;

use crate::codes::CodewordPair;
use crate::error::{Error, Result};
use crate::fock::{DensityOperator, FockVector, OperatorMatrix};

pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

/// Kraus branches are added until at least this fraction of the trace is kept.
pub const RETAINED_TRACE: f64 = 1.0 - 1e-10;

pub const KRAUS_HARD_CAP: usize = 60;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const TRACE_TOLERANCE: f64 = 1e-8;
const DEGENERATE_OVERLAP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub l0_km: f64,
    pub attenuation_db_per_km: f64,
    pub eta: f64,
}

impl ChannelParams {
    pub fn new(l0_km: f64, attenuation_db_per_km: f64) -> Result<Self> {
        Ok(Self {
            l0_km,
            attenuation_db_per_km,
            eta: transmissivity(l0_km, attenuation_db_per_km)?,
        })
    }
}

/// `10^(-attenuation * L0 / 10)`.
pub fn transmissivity(l0_km: f64, attenuation_db_per_km: f64) -> Result<f64> {
    if !(l0_km.is_finite() && l0_km >= 0.0) {
        return Err(Error::Domain(format!("elementary distance {l0_km} km")));
    }
    if !(attenuation_db_per_km.is_finite() && attenuation_db_per_km >= 0.0) {
        return Err(Error::Domain(format!(
            "attenuation {attenuation_db_per_km} dB/km"
        )));
    }
    Ok(10f64.powf(-attenuation_db_per_km * l0_km / 10.0))
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "transmissivity {eta} outside [0, 1]"
        )))
    }
}

/// `<n-k| A_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k)`, evaluated in the log
/// domain so large `n` and `k` neither overflow nor underflow early.
fn kraus_coefficient(n: usize, k: usize, eta: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut ln = 0.5 * ln_binomial(n as u64, k as u64);
    if n > k {
        ln += 0.5 * (n - k) as f64 * eta.ln();
    }
    if k > 0 {
        ln += 0.5 * k as f64 * (1.0 - eta).ln();
    }
    ln.exp()
}

/// `A_k = sqrt((1-eta)^k / k!) sqrt(eta)^n a^k`.
pub fn kraus_operator(k: usize, eta: f64, cutoff: usize) -> Result<OperatorMatrix> {
    check_eta(eta)?;
    let dim = cutoff + 1;
    OperatorMatrix::from_matrix(DMatrix::from_fn(dim, dim, |r, c| {
        if c == r + k {
            C64::new(kraus_coefficient(c, k, eta), 0.0)
        } else {
            ZERO
        }
    }))
}

/// `A_k |v>` without forming the matrix.
pub fn kraus_apply(k: usize, eta: f64, v: &FockVector) -> FockVector {
    let mut out = FockVector::zeros(v.cutoff());
    let amps = out.amplitudes_mut();
    for (n, a) in v.amplitudes().iter().enumerate().skip(k) {
        amps[n - k] = a * kraus_coefficient(n, k, eta);
    }
    out
}

/// Probability of losing exactly `k` photons, for each `k <= cutoff`, given
/// Fock populations.
pub fn loss_distribution(populations: &[f64], eta: f64) -> Vec<f64> {
    (0..populations.len())
        .map(|k| {
            populations
                .iter()
                .enumerate()
                .skip(k)
                .map(|(n, p)| p * kraus_coefficient(n, k, eta).powi(2))
                .sum()
        })
        .collect()
}

/// Smallest loss count whose cumulative branch weight reaches
/// [`RETAINED_TRACE`] of the total.
pub fn kraus_cap(populations: &[f64], eta: f64) -> Result<usize> {
    let total: f64 = populations.iter().sum();
    if total == 0.0 {
        return Ok(0);
    }
    let mut cumulative = 0.0;
    for (k, p) in loss_distribution(populations, eta).into_iter().enumerate() {
        if k > KRAUS_HARD_CAP {
            break;
        }
        cumulative += p;
        if cumulative >= RETAINED_TRACE * total {
            return Ok(k);
        }
    }
    Err(Error::KrausCap {
        retained: cumulative / total,
    })
}

/// Loss channel `rho -> sum_k A_k rho A_k^dag`.
pub trait LossChannel: Sized {
    fn apply_loss(&self, eta: f64) -> Result<Self>;
}

impl LossChannel for DensityOperator {
    fn apply_loss(&self, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::NotNormalized { norm_sqr: tr });
        }
        let rho = self.matrix();
        let pops: Vec<f64> = (0..rho.nrows()).map(|n| rho[(n, n)].re).collect();
        let cap = kraus_cap(&pops, eta)?;
        let mut out = DMatrix::zeros(rho.nrows(), rho.ncols());
        for k in 0..=cap {
            let a = kraus_operator(k, eta, self.cutoff())?;
            out += a.matrix() * rho * a.matrix().adjoint();
        }
        Ok(DensityOperator::from_matrix_unchecked(out))
    }
}

/// Which tensor factors a [`HybridState`] lives on. Atom kets use the basis
/// `|up>, |down>` and, for pairs, `|up up>, |up down>, |down up>, |down down>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factors {
    AtomField,
    AtomAtomField,
}

impl Factors {
    pub fn atom_dim(self) -> usize {
        match self {
            Factors::AtomField => 2,
            Factors::AtomAtomField => 4,
        }
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Factors::AtomField => &["atom", "field"],
            Factors::AtomAtomField => &["atom", "atom", "field"],
        }
    }
}

/// One product term `|atoms> (x) |field>` of a branch ket.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub atoms: Vec<C64>,
    pub field: FockVector,
}

/// A pure, unnormalized ket `sum_i |atoms_i>|field_i>` produced by losing
/// `loss` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub loss: usize,
    pub components: Vec<Component>,
}

impl Branch {
    pub fn norm_sqr(&self) -> f64 {
        let mut acc = ZERO;
        for a in &self.components {
            for b in &self.components {
                acc += atom_inner(&a.atoms, &b.atoms) * a.field.inner(&b.field);
            }
        }
        acc.re
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            loss: self.loss,
            components: self
                .components
                .iter()
                .map(|c| Component {
                    atoms: c.atoms.clone(),
                    field: c.field.scaled(C64::new(factor, 0.0)),
                })
                .collect(),
        }
    }
}

/// `weight |atoms><atoms| (x) I`, with `I` the (unnormalized) identity on the
/// retained Fock support. Stands in for a discarded branch of trace `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTerm {
    pub loss: usize,
    pub weight: f64,
    pub atoms: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Content {
    Branches {
        branches: Vec<Branch>,
        noise: Vec<NoiseTerm>,
    },
    Summed(DMatrix<C64>),
}

/// Atom(s) (x) field state. Either a branch record or, when built from a bare
/// matrix, only the summed density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    factors: Factors,
    cutoff: usize,
    /// Rotation order `M` and syndrome `q` once projected.
    syndrome: Option<(usize, usize)>,
    content: Content,
}

fn atom_inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

impl HybridState {
    /// Wraps a summed density matrix on `atoms (x) field` (index
    /// `atom * (cutoff + 1) + n`). Such a state has no branch bookkeeping.
    pub fn from_matrix(factors: Factors, cutoff: usize, m: DMatrix<C64>) -> Result<Self> {
        let dim = factors.atom_dim() * (cutoff + 1);
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{:?} with cutoff {cutoff} needs {dim}x{dim}, got {}x{}",
                factors,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self {
            factors,
            cutoff,
            syndrome: None,
            content: Content::Summed(m),
        })
    }

    pub fn factors(&self) -> Factors {
        self.factors
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn syndrome(&self) -> Option<(usize, usize)> {
        self.syndrome
    }

    pub fn branches(&self) -> Result<&[Branch]> {
        match &self.content {
            Content::Branches { branches, .. } => Ok(branches),
            Content::Summed(_) => Err(Error::MissingBookkeeping),
        }
    }

    pub fn noise(&self) -> Result<&[NoiseTerm]> {
        match &self.content {
            Content::Branches { noise, .. } => Ok(noise),
            Content::Summed(_) => Err(Error::MissingBookkeeping),
        }
    }

    fn from_parts(
        factors: Factors,
        cutoff: usize,
        syndrome: Option<(usize, usize)>,
        branches: Vec<Branch>,
        noise: Vec<NoiseTerm>,
    ) -> Self {
        Self {
            factors,
            cutoff,
            syndrome,
            content: Content::Branches { branches, noise },
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.content {
            Content::Summed(m) => m.trace().re,
            Content::Branches { branches, noise } => {
                let field_dim = (self.cutoff + 1) as f64;
                branches.iter().map(Branch::norm_sqr).sum::<f64>()
                    + noise
                        .iter()
                        .map(|t| t.weight * atom_inner(&t.atoms, &t.atoms).re * field_dim)
                        .sum::<f64>()
            }
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::InvalidState(format!(
                "trace {tr} cannot be normalized"
            )));
        }
        Ok(self.scaled(1.0 / tr))
    }

    fn scaled(&self, factor: f64) -> Self {
        let content = match &self.content {
            Content::Summed(m) => Content::Summed(m.map(|z| z * factor)),
            Content::Branches { branches, noise } => Content::Branches {
                branches: branches.iter().map(|b| b.scaled(factor.sqrt())).collect(),
                noise: noise
                    .iter()
                    .map(|t| NoiseTerm {
                        weight: t.weight * factor,
                        ..t.clone()
                    })
                    .collect(),
            },
        };
        Self {
            content,
            ..self.clone()
        }
    }

    /// Dense matrix on `atoms (x) field`, index `atom * (cutoff + 1) + n`.
    pub fn density_matrix(&self) -> DMatrix<C64> {
        let branches = match &self.content {
            Content::Summed(m) => return m.clone(),
            Content::Branches { branches, noise } => (branches, noise),
        };
        let field_dim = self.cutoff + 1;
        let dim = self.factors.atom_dim() * field_dim;
        let mut out = DMatrix::zeros(dim, dim);
        for branch in branches.0 {
            let mut ket = DMatrix::<C64>::zeros(dim, 1);
            for comp in &branch.components {
                for (a, amp_a) in comp.atoms.iter().enumerate() {
                    for (n, amp_n) in comp.field.amplitudes().iter().enumerate() {
                        ket[(a * field_dim + n, 0)] += amp_a * amp_n;
                    }
                }
            }
            out += &ket * ket.adjoint();
        }
        for term in branches.1 {
            for (a, x) in term.atoms.iter().enumerate() {
                for (b, y) in term.atoms.iter().enumerate() {
                    let v = x * y.conj() * term.weight;
                    for n in 0..field_dim {
                        out[(a * field_dim + n, b * field_dim + n)] += v;
                    }
                }
            }
        }
        out
    }

    /// Field state with the atoms traced out.
    pub fn reduced_field(&self) -> DensityOperator {
        let full = self.density_matrix();
        let fd = self.cutoff + 1;
        let out = DMatrix::from_fn(fd, fd, |i, j| {
            (0..self.factors.atom_dim())
                .map(|a| full[(a * fd + i, a * fd + j)])
                .sum()
        });
        DensityOperator::from_matrix_unchecked(out)
    }

    /// Atom state with the field traced out.
    pub fn reduced_atoms(&self) -> DMatrix<C64> {
        let full = self.density_matrix();
        let fd = self.cutoff + 1;
        let ad = self.factors.atom_dim();
        DMatrix::from_fn(ad, ad, |a, b| {
            (0..fd).map(|n| full[(a * fd + n, b * fd + n)]).sum()
        })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let m = self.density_matrix();
        (&m - m.adjoint())
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

impl LossChannel for HybridState {
    /// Loss on the field factor. Every branch splits into one branch per
    /// additional loss count.
    fn apply_loss(&self, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::NotNormalized { norm_sqr: tr });
        }
        let (branches, noise) = match &self.content {
            Content::Summed(_) => return Err(Error::MissingBookkeeping),
            Content::Branches { branches, noise } => (branches, noise),
        };
        if !noise.is_empty() {
            return Err(Error::InvalidState(
                "identity-replaced branches cannot be propagated further".into(),
            ));
        }
        let mut out = Vec::new();
        for branch in branches {
            let mut pops = vec![0.0; self.cutoff + 1];
            for comp in &branch.components {
                let weight = atom_inner(&comp.atoms, &comp.atoms).re;
                for (n, a) in comp.field.amplitudes().iter().enumerate() {
                    pops[n] += weight * a.norm_sqr();
                }
            }
            for k in 0..=kraus_cap(&pops, eta)? {
                out.push(Branch {
                    loss: branch.loss + k,
                    components: branch
                        .components
                        .iter()
                        .map(|c| Component {
                            atoms: c.atoms.clone(),
                            field: kraus_apply(k, eta, &c.field),
                        })
                        .collect(),
                });
            }
        }
        Ok(Self::from_parts(
            self.factors,
            self.cutoff,
            self.syndrome,
            out,
            Vec::new(),
        ))
    }
}

/// `M = 2^m`, or an error when `M` is not a power of two `>= 2`.
pub fn order_exponent(m_order: usize) -> Result<u32> {
    if m_order >= 2 && m_order.is_power_of_two() {
        Ok(m_order.trailing_zeros())
    } else {
        Err(Error::UnsupportedOrder(m_order))
    }
}

/// `(|up>|0_code> + |down>|1_code>) / sqrt(2)`.
pub fn joint_state(pair: &CodewordPair) -> Result<HybridState> {
    order_exponent(pair.spec.m)?;
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let branch = Branch {
        loss: 0,
        components: vec![
            Component {
                atoms: vec![C64::new(1.0, 0.0), ZERO],
                field: pair.zero.scaled(h),
            },
            Component {
                atoms: vec![ZERO, C64::new(1.0, 0.0)],
                field: pair.one.scaled(h),
            },
        ],
    };
    Ok(HybridState::from_parts(
        Factors::AtomField,
        pair.zero.cutoff(),
        None,
        vec![branch],
        Vec::new(),
    ))
}

/// Keeps the branches whose loss count is `q` modulo `2^m`. Returns the
/// normalized conditional state and its probability; a zero-probability
/// outcome comes back as an empty state.
pub fn syndrome_project(rho_f: &HybridState, m: u32, q: usize) -> Result<(HybridState, f64)> {
    let classes = 1usize << m;
    if q >= classes {
        return Err(Error::SyndromeOutOfRange { q, classes });
    }
    let total = rho_f.trace();
    let kept: Vec<Branch> = rho_f
        .branches()?
        .iter()
        .filter(|b| b.loss % classes == q)
        .cloned()
        .collect();
    let mut state = HybridState::from_parts(
        rho_f.factors,
        rho_f.cutoff,
        Some((classes, q)),
        kept,
        rho_f.noise()?.to_vec(),
    );
    let p = state.trace() / total;
    if p > 0.0 {
        state = state.normalized()?;
    }
    Ok((state, p))
}

/// `e^{-i j pi / M}`, the relative phase a `j`-photon loss leaves on the
/// atomic Bell pair.
pub fn branch_phase(loss: usize, m_order: usize) -> C64 {
    C64::from_polar(1.0, -(loss as f64) * PI / m_order as f64)
}

/// `(|up up> + e^{i theta} |down down>) / sqrt(2)`.
pub fn bell_phi(phase: C64) -> Vec<C64> {
    let h = FRAC_1_SQRT_2;
    vec![C64::new(h, 0.0), ZERO, ZERO, phase * h]
}

/// `(|up down> + e^{i theta} |down up>) / sqrt(2)`.
pub fn bell_psi(phase: C64) -> Vec<C64> {
    let h = FRAC_1_SQRT_2;
    vec![ZERO, C64::new(h, 0.0), phase * h, ZERO]
}

/// Ideal entangling step: in a branch that lost `j` photons,
/// `|up> -> |phi_j>` and `|down> -> |psi_j>`.
pub fn entangle(rho_sm: &HybridState) -> Result<HybridState> {
    if rho_sm.factors != Factors::AtomField {
        return Err(Error::InvalidState(
            "entangling needs an atom-field state".into(),
        ));
    }
    let (m_order, _) = rho_sm.syndrome.ok_or(Error::MissingBookkeeping)?;
    if !rho_sm.noise()?.is_empty() {
        return Err(Error::InvalidState(
            "entangling a noise-replaced state".into(),
        ));
    }
    let branches = rho_sm
        .branches()?
        .iter()
        .map(|b| {
            let phase = branch_phase(b.loss, m_order);
            let (phi, psi) = (bell_phi(phase), bell_psi(phase));
            Branch {
                loss: b.loss,
                components: b
                    .components
                    .iter()
                    .map(|c| Component {
                        atoms: phi
                            .iter()
                            .zip(&psi)
                            .map(|(x, y)| c.atoms[0] * x + c.atoms[1] * y)
                            .collect(),
                        field: c.field.clone(),
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(HybridState::from_parts(
        Factors::AtomAtomField,
        rho_sm.cutoff,
        rho_sm.syndrome,
        branches,
        Vec::new(),
    ))
}

/// The entangled link state conditioned on syndrome `q`, with its
/// probability.
pub fn entangled_state_with_probability(
    pair: &CodewordPair,
    eta: f64,
    q: usize,
) -> Result<(HybridState, f64)> {
    let m = order_exponent(pair.spec.m)?;
    let rho_f = joint_state(pair)?.apply_loss(eta)?;
    let (rho_sm, p) = syndrome_project(&rho_f, m, q)?;
    Ok((entangle(&rho_sm)?, p))
}

pub fn entangled_state(pair: &CodewordPair, eta: f64, q: usize) -> Result<HybridState> {
    Ok(entangled_state_with_probability(pair, eta, q)?.0)
}

/// Index `t` of a branch with loss `q + M t`.
fn branch_index(loss: usize, m_order: usize) -> usize {
    loss / m_order
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellSplit {
    pub rho_plus: HybridState,
    pub rho_minus: HybridState,
    pub weight_plus: f64,
    pub weight_minus: f64,
}

/// Even-`t` branches carry `phi+/psi+` (up to the known syndrome phase),
/// odd-`t` branches the phase-flipped `phi-/psi-`.
pub fn split_even_odd(rho_fi: &HybridState) -> Result<BellSplit> {
    let (m_order, _) = rho_fi.syndrome.ok_or(Error::MissingBookkeeping)?;
    let (even, odd): (Vec<Branch>, Vec<Branch>) = rho_fi
        .branches()?
        .iter()
        .cloned()
        .partition(|b| branch_index(b.loss, m_order).is_multiple_of(2));
    let part = |branches: Vec<Branch>| -> Result<(HybridState, f64)> {
        let s = HybridState::from_parts(
            rho_fi.factors,
            rho_fi.cutoff,
            rho_fi.syndrome,
            branches,
            Vec::new(),
        );
        let w = s.trace();
        Ok((if w > 0.0 { s.normalized()? } else { s }, w))
    };
    let (rho_plus, weight_plus) = part(even)?;
    let (rho_minus, weight_minus) = part(odd)?;
    Ok(BellSplit {
        rho_plus,
        rho_minus,
        weight_plus,
        weight_minus,
    })
}

/// Least-squares `K` in `A_q|C> = K A_{q+M}|C>` for the `|0>` word, and the
/// larger relative residual over both words. The `|1>` word may carry the
/// opposite sign of `K`; only the residual is compared across words.
pub fn cat_proportionality(pair: &CodewordPair, eta: f64, q: usize) -> Result<(f64, f64)> {
    check_eta(eta)?;
    let m_order = pair.spec.m;
    let fit = |word: &FockVector| -> Result<(C64, f64)> {
        let a = kraus_apply(q, eta, word);
        let b = kraus_apply(q + m_order, eta, word);
        if a.norm_sqr() == 0.0 || b.norm_sqr() == 0.0 {
            return Err(Error::DegenerateCode(format!(
                "damped codeword vanishes for syndrome {q}"
            )));
        }
        let k = b.inner(&a) / b.norm_sqr();
        let mut res = a.clone();
        res.add_scaled(-k, &b);
        Ok((k, res.norm() / a.norm()))
    };
    let (k0, r0) = fit(&pair.zero)?;
    let (_, r1) = fit(&pair.one)?;
    Ok((k0.re, r0.max(r1)))
}

/// Traces of the branches an approximation replaces, relative to the
/// syndrome-`q` probability: `(even t >= 2, odd t)`.
pub fn replacement_weights(pair: &CodewordPair, eta: f64, q: usize) -> Result<(f64, f64)> {
    let state = entangled_state(pair, eta, q)?;
    let m_order = pair.spec.m;
    let (mut w_even, mut w_odd) = (0.0, 0.0);
    for b in state.branches()? {
        match branch_index(b.loss, m_order) {
            0 => {}
            t if t % 2 == 0 => w_even += b.norm_sqr(),
            _ => w_odd += b.norm_sqr(),
        }
    }
    Ok((w_even, w_odd))
}

fn noise_from(branch: &Branch, fraction: f64) -> impl Iterator<Item = NoiseTerm> + '_ {
    branch.components.iter().map(move |c| NoiseTerm {
        loss: branch.loss,
        weight: fraction * c.field.norm_sqr() * atom_inner(&c.atoms, &c.atoms).re,
        atoms: c.atoms.clone(),
    })
}

/// The `t = 0` branch's field content relabelled with the Bell vectors of a
/// branch that lost `loss` photons, scaled to trace `weight`.
fn folded_branch(lead: &Branch, loss: usize, m_order: usize, weight: f64) -> Branch {
    let phase = branch_phase(loss, m_order);
    let lead_weight = lead.norm_sqr();
    let scale = if lead_weight > 0.0 {
        (weight / lead_weight).sqrt()
    } else {
        0.0
    };
    let bell = [bell_phi(phase), bell_psi(phase)];
    Branch {
        loss,
        components: lead
            .components
            .iter()
            .zip(bell)
            .map(|(c, atoms)| Component {
                atoms,
                field: c.field.scaled(C64::new(scale, 0.0)),
            })
            .collect(),
    }
}

fn lead_branch(state: &HybridState) -> Result<Branch> {
    state
        .branches()?
        .iter()
        .find(|b| b.loss < state.syndrome.map_or(1, |s| s.0))
        .cloned()
        .ok_or_else(|| Error::DegenerateCode("syndrome outcome has no leading branch".into()))
}

/// Every branch folded onto the leading one with its own weight and parity.
/// Exact for cat codes, an upper bound for the others.
pub fn proportional_state(pair: &CodewordPair, eta: f64, q: usize) -> Result<HybridState> {
    proportional_from(&entangled_state(pair, eta, q)?)
}

pub(crate) fn proportional_from(state: &HybridState) -> Result<HybridState> {
    let (m_order, _) = state.syndrome.ok_or(Error::MissingBookkeeping)?;
    let lead = lead_branch(state)?;
    let branches = state
        .branches()?
        .iter()
        .map(|b| folded_branch(&lead, b.loss, m_order, b.norm_sqr()))
        .collect();
    Ok(HybridState::from_parts(
        state.factors,
        state.cutoff,
        state.syndrome,
        branches,
        Vec::new(),
    ))
}

/// Leading branch kept; every other branch replaced by identity noise on the
/// field tensored with the Bell projectors it carried. Since a branch is
/// dominated by its trace times the identity, this can only lower the
/// fidelity after discrimination.
pub fn worst_case_state(pair: &CodewordPair, eta: f64, q: usize) -> Result<HybridState> {
    worst_case_from(&entangled_state(pair, eta, q)?)
}

pub(crate) fn worst_case_from(state: &HybridState) -> Result<HybridState> {
    let lead = lead_branch(state)?;
    let noise = state
        .branches()?
        .iter()
        .filter(|b| b.loss != lead.loss)
        .flat_map(|b| noise_from(b, 1.0).collect::<Vec<_>>())
        .collect();
    HybridState::from_parts(
        state.factors,
        state.cutoff,
        state.syndrome,
        vec![lead],
        noise,
    )
    .normalized()
}

/// `|<u_0|u_t>|` between the normalized damped `|0>` words of the leading
/// branch and of branch `t`, for `t = 0, 1, ..`.
pub fn branch_overlaps(pair: &CodewordPair, eta: f64, q: usize) -> Result<Vec<f64>> {
    let m_order = pair.spec.m;
    let lead = kraus_apply(q, eta, &pair.zero);
    let lead_norm = lead.norm();
    if lead_norm == 0.0 {
        return Err(Error::DegenerateCode(format!(
            "damped codeword vanishes for syndrome {q}"
        )));
    }
    let mut out = Vec::new();
    let mut loss = q;
    while loss <= pair.zero.cutoff() {
        let u = kraus_apply(loss, eta, &pair.zero);
        let n = u.norm();
        if n == 0.0 {
            break;
        }
        out.push((lead.inner(&u).norm() / (lead_norm * n)).min(1.0));
        loss += m_order;
    }
    Ok(out)
}

/// Each non-leading branch split into a part parallel to the leading branch
/// (weight `v w`, folded like [`proportional_state`]) and an orthogonal
/// remainder (weight `(1 - v) w`, replaced like [`worst_case_state`]).
pub fn overlap_bound_state(pair: &CodewordPair, eta: f64, q: usize) -> Result<HybridState> {
    let state = entangled_state(pair, eta, q)?;
    overlap_bound_from(&state, &branch_overlaps(pair, eta, q)?)
}

pub(crate) fn overlap_bound_from(state: &HybridState, overlaps: &[f64]) -> Result<HybridState> {
    let (m_order, _) = state.syndrome.ok_or(Error::MissingBookkeeping)?;
    let lead = lead_branch(state)?;
    let mut branches = vec![lead.clone()];
    let mut noise = Vec::new();
    for b in state.branches()?.iter().filter(|b| b.loss != lead.loss) {
        let v = overlaps
            .get(branch_index(b.loss, m_order))
            .copied()
            .unwrap_or(0.0);
        branches.push(folded_branch(&lead, b.loss, m_order, v * b.norm_sqr()));
        noise.extend(noise_from(b, 1.0 - v));
    }
    HybridState::from_parts(state.factors, state.cutoff, state.syndrome, branches, noise)
        .normalized()
}

/// Optimal unambiguous discrimination of two equiprobable pure states:
/// `E_i = c |e_i><e_i|`, `c = 1 / (1 + |s|)`, with `e_0` orthogonal to the
/// second state within their span and vice versa.
#[derive(Debug, Clone, PartialEq)]
pub struct UsdMeasurement {
    e0: FockVector,
    e1: FockVector,
    c: f64,
    overlap: C64,
}

impl UsdMeasurement {
    pub fn new(u0: &FockVector, u1: &FockVector) -> Result<Self> {
        let n0 = u0.normalized()?;
        let n1 = u1.normalized()?;
        let s = n0.inner(&n1);
        if s.norm() >= DEGENERATE_OVERLAP {
            return Err(Error::DegenerateCode(format!(
                "damped codewords indistinguishable (|overlap| = {:.15})",
                s.norm()
            )));
        }
        let mut e0 = n0.clone();
        e0.add_scaled(-s.conj(), &n1);
        let mut e1 = n1.clone();
        e1.add_scaled(-s, &n0);
        Ok(Self {
            e0: e0.normalized()?,
            e1: e1.normalized()?,
            c: 1.0 / (1.0 + s.norm()),
            overlap: s,
        })
    }

    /// Discrimination for syndrome `q`: built on `A_q|0>` and `A_q|1>`.
    pub fn for_syndrome(pair: &CodewordPair, eta: f64, q: usize) -> Result<Self> {
        Self::new(
            &kraus_apply(q, eta, &pair.zero),
            &kraus_apply(q, eta, &pair.one),
        )
    }

    pub fn overlap(&self) -> C64 {
        self.overlap
    }

    pub fn success_probability(&self) -> f64 {
        1.0 - self.overlap.norm()
    }

    /// Unnormalized atomic states left by outcomes 0 and 1.
    pub fn outcome_states(&self, state: &HybridState) -> Result<[Matrix4<C64>; 2]> {
        if state.factors != Factors::AtomAtomField {
            return Err(Error::InvalidState(
                "discrimination needs a two-atom state".into(),
            ));
        }
        let mut out = [Matrix4::zeros(), Matrix4::zeros()];
        for (sigma, e) in out.iter_mut().zip([&self.e0, &self.e1]) {
            for b in state.branches()? {
                let mut x = Vector4::zeros();
                for c in &b.components {
                    let amp = e.inner(&c.field);
                    for (i, a) in c.atoms.iter().enumerate() {
                        x[i] += amp * a;
                    }
                }
                *sigma += x * x.adjoint() * C64::new(self.c, 0.0);
            }
            for t in state.noise()? {
                let a = Vector4::from_iterator(t.atoms.iter().copied());
                *sigma += a * a.adjoint() * C64::new(self.c * t.weight, 0.0);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{build_codewords, CodeSpec};
    use crate::fock::{coherent_state, mean_photon_number, uhlmann_fidelity};

    fn cat(alpha: f64) -> CodewordPair {
        build_codewords(&CodeSpec::cat(2, alpha)).unwrap()
    }

    fn binom(m: usize, k: usize) -> CodewordPair {
        build_codewords(&CodeSpec::binomial(m, k)).unwrap()
    }

    #[test]
    fn transmissivity_examples() {
        assert_eq!(transmissivity(0.0, 0.2).unwrap(), 1.0);
        assert!((transmissivity(1.0, 0.2).unwrap() - 0.955).abs() < 1e-3);
        assert!((transmissivity(0.5, 0.2).unwrap() - 0.9772).abs() < 5e-4);
        assert!(transmissivity(-1.0, 0.2).is_err());
        let p = ChannelParams::new(1.0, 0.2).unwrap();
        assert_eq!(p.eta, transmissivity(1.0, 0.2).unwrap());
    }

    #[test]
    fn kraus_examples() {
        let eta = 0.9;
        let a0 = kraus_operator(0, eta, 6).unwrap();
        for n in 0..=6 {
            assert!((a0.entry(n, n).re - eta.sqrt().powi(n as i32)).abs() < 1e-14);
        }
        let out = kraus_apply(1, eta, &crate::fock::basis_state(1, 6).unwrap());
        assert!((out.amplitude(0).re - (1.0 - eta).sqrt()).abs() < 1e-14);
        let lossless = kraus_operator(3, 1.0, 6).unwrap();
        assert!(lossless.matrix().iter().all(|z| z.norm() == 0.0));
        assert_eq!(
            kraus_operator(0, 1.0, 6).unwrap(),
            OperatorMatrix::identity(6)
        );
    }

    #[test]
    fn kraus_matches_ladder_definition() {
        let eta: f64 = 0.8;
        let cutoff = 8;
        let a = crate::fock::annihilation(cutoff);
        let damp = DMatrix::from_fn(cutoff + 1, cutoff + 1, |r, c| {
            if r == c {
                C64::new(eta.sqrt().powi(r as i32), 0.0)
            } else {
                ZERO
            }
        });
        let mut ak = DMatrix::identity(cutoff + 1, cutoff + 1);
        for k in 0..4 {
            let pref = ((1.0 - eta).powi(k as i32) / (1..=k).product::<usize>() as f64).sqrt();
            let want = &damp * &ak * C64::new(pref, 0.0);
            let got = kraus_operator(k, eta, cutoff).unwrap();
            assert!((got.matrix() - want).iter().all(|z| z.norm() < 1e-12));
            ak = &ak * a.matrix();
        }
    }

    #[test]
    fn kraus_completeness() {
        let cutoff = 30;
        for eta in [0.3, 0.9, 0.999] {
            let mut sum = DMatrix::<C64>::zeros(cutoff + 1, cutoff + 1);
            for k in 0..=cutoff {
                let a = kraus_operator(k, eta, cutoff).unwrap();
                sum += a.matrix().adjoint() * a.matrix();
            }
            let id = DMatrix::<C64>::identity(cutoff + 1, cutoff + 1);
            assert!((sum - id).iter().all(|z| z.norm() < 1e-10));
        }
    }

    #[test]
    fn loss_on_coherent_state() {
        let alpha = C64::new(1.5, 0.3);
        let eta: f64 = 0.8;
        let rho = DensityOperator::from_pure(&coherent_state(alpha, 40).unwrap());
        let out = rho.apply_loss(eta).unwrap();
        let want = DensityOperator::from_pure(&coherent_state(alpha * eta.sqrt(), 40).unwrap());
        assert!((out.matrix() - want.matrix())
            .iter()
            .all(|z| z.norm() < 1e-8));
        assert!((out.trace() - 1.0).abs() < 1e-9);
        let nin = rho.mean_photon_number();
        assert!((out.mean_photon_number() - eta * nin).abs() < 1e-8);
        assert_eq!(rho.apply_loss(1.0).unwrap(), rho);
    }

    #[test]
    fn loss_composes() {
        let pair = binom(2, 3);
        let rho = DensityOperator::from_pure(&pair.zero);
        let twice = rho.apply_loss(0.9).unwrap().apply_loss(0.8).unwrap();
        let once = rho.apply_loss(0.72).unwrap();
        assert!((twice.matrix() - once.matrix())
            .iter()
            .all(|z| z.norm() < 1e-8));
    }

    #[test]
    fn joint_state_reductions() {
        let pair = binom(2, 2);
        let joint = joint_state(&pair).unwrap();
        assert!((joint.trace() - 1.0).abs() < 1e-12);
        let atoms = joint.reduced_atoms();
        assert!((atoms[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!(atoms[(0, 1)].norm() < 1e-12);

        let pair = cat(1.0);
        let atoms = joint_state(&pair).unwrap().reduced_atoms();
        let s = pair.one.inner(&pair.zero);
        assert!((atoms[(0, 1)] - s / 2.0).norm() < 1e-12);

        assert!(matches!(
            joint_state(&build_codewords(&CodeSpec::binomial(3, 1)).unwrap()),
            Err(Error::UnsupportedOrder(3))
        ));
    }

    #[test]
    fn hybrid_loss_traces_field_channel() {
        let pair = cat(1.2);
        let joint = joint_state(&pair).unwrap();
        let lossy = joint.apply_loss(0.9).unwrap();
        assert!((lossy.trace() - 1.0).abs() < 1e-9);
        let direct = joint.reduced_field().apply_loss(0.9).unwrap();
        let via = lossy.reduced_field();
        assert!((direct.matrix() - via.matrix())
            .iter()
            .all(|z| z.norm() < 1e-9));
        assert!(lossy.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn syndrome_probabilities() {
        let pair = binom(2, 1);
        let lossless = joint_state(&pair).unwrap().apply_loss(1.0).unwrap();
        assert!((syndrome_project(&lossless, 1, 0).unwrap().1 - 1.0).abs() < 1e-12);
        assert_eq!(syndrome_project(&lossless, 1, 1).unwrap().1, 0.0);
        assert!(matches!(
            syndrome_project(&lossless, 1, 2),
            Err(Error::SyndromeOutOfRange { q: 2, classes: 2 })
        ));

        let eta: f64 = 0.999;
        let rho_f = joint_state(&pair).unwrap().apply_loss(eta).unwrap();
        let p1 = syndrome_project(&rho_f, 1, 1).unwrap().1;
        let nbar = mean_photon_number(&pair.zero).unwrap();
        assert!((p1 - (1.0 - eta) * nbar).abs() < 1e-5);
        // Exact: only |2> can lose one photon, with probability 2 eta (1-eta).
        assert!((p1 - 0.5 * 2.0 * eta * (1.0 - eta)).abs() < 1e-12);
    }

    #[test]
    fn syndrome_completeness() {
        for (pair, m) in [(binom(2, 3), 1), (binom(4, 2), 2), (cat(1.4), 1)] {
            for eta in [0.5, 0.9, 0.99] {
                let rho_f = joint_state(&pair).unwrap().apply_loss(eta).unwrap();
                let total: f64 = (0..1usize << m)
                    .map(|q| syndrome_project(&rho_f, m, q).unwrap().1)
                    .sum();
                assert!((total - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lossless_link_is_pure_bell_mixture() {
        let pair = binom(2, 2);
        let state = entangled_state(&pair, 1.0, 0).unwrap();
        assert_eq!(state.branches().unwrap().len(), 1);
        assert!((state.trace() - 1.0).abs() < 1e-12);
        let atoms = state.reduced_atoms();
        let phi = bell_phi(C64::new(1.0, 0.0));
        let psi = bell_psi(C64::new(1.0, 0.0));
        let overlap = |v: &[C64]| -> f64 {
            let mut acc = ZERO;
            for i in 0..4 {
                for j in 0..4 {
                    acc += v[i].conj() * atoms[(i, j)] * v[j];
                }
            }
            acc.re
        };
        assert!((overlap(&phi) + overlap(&psi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn branch_phases_factorize() {
        for m_order in [2usize, 4, 8] {
            for q in 0..m_order {
                let base = branch_phase(q, m_order);
                for t in 0..6 {
                    let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                    let got = branch_phase(q + m_order * t, m_order);
                    assert!((got - base * sign).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn even_odd_split() {
        let pair = binom(2, 1);
        let split = split_even_odd(&entangled_state(&pair, 1.0, 0).unwrap()).unwrap();
        assert_eq!(split.weight_minus, 0.0);

        let eta: f64 = 0.99;
        let state = entangled_state(&pair, eta, 0).unwrap();
        let split = split_even_odd(&state).unwrap();
        assert!((split.weight_plus + split.weight_minus - 1.0).abs() < 1e-9);
        // Brute force: K = 1 words live on {0, 2}; the odd class t = 1 is a
        // two-photon loss from |2>.
        let p0 = 0.5 * (1.0 + eta * eta) + 0.5 * (1.0 - eta).powi(2);
        let want = 0.5 * (1.0 - eta).powi(2) / p0;
        assert!((split.weight_minus - want).abs() < 1e-12);
        assert!(matches!(
            split_even_odd(&joint_state(&pair).unwrap()),
            Err(Error::MissingBookkeeping)
        ));
    }

    #[test]
    fn proportionality() {
        for eta in [0.9, 0.99] {
            let (k, res) = cat_proportionality(&cat(1.0), eta, 0).unwrap();
            assert!(res < 1e-9, "residual {res}");
            assert!(k.is_finite() && k > 0.0);
            assert!(
                cat_proportionality(&build_codewords(&CodeSpec::cat(4, 2.0)).unwrap(), eta, 1)
                    .unwrap()
                    .1
                    < 1e-9
            );
        }
        let (_, res) = cat_proportionality(&binom(2, 2), 0.95, 0).unwrap();
        assert!(res > 1e-3);
    }

    #[test]
    fn bound_states_at_unit_transmissivity() {
        let pair = binom(2, 2);
        let exact = entangled_state(&pair, 1.0, 0).unwrap();
        let worst = worst_case_state(&pair, 1.0, 0).unwrap();
        assert!(worst.noise().unwrap().is_empty());
        let diff = worst.density_matrix() - exact.density_matrix();
        assert!(diff.iter().all(|z| z.norm() < 1e-14));
        assert_eq!(replacement_weights(&pair, 1.0, 0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn replacement_weights_match_branch_sums() {
        let pair = binom(2, 3);
        let eta: f64 = 0.9;
        let (w_even, w_odd) = replacement_weights(&pair, eta, 0).unwrap();
        let loss_prob = |j: usize| kraus_apply(j, eta, &pair.zero).norm_sqr();
        let p0: f64 = (0..=6).step_by(2).map(loss_prob).sum();
        let even: f64 = [4, 8].iter().map(|&j| loss_prob(j)).sum::<f64>() / p0;
        let odd: f64 = [2, 6].iter().map(|&j| loss_prob(j)).sum::<f64>() / p0;
        assert!((w_even - even).abs() < 1e-9);
        assert!((w_odd - odd).abs() < 1e-9);
    }

    #[test]
    fn cat_overlaps_are_unity() {
        let v = branch_overlaps(&cat(1.3), 0.95, 0).unwrap();
        assert!(v.len() > 3);
        assert!(v.iter().take(6).all(|x| (x - 1.0).abs() < 1e-8));
        let v = branch_overlaps(&binom(2, 2), 0.95, 0).unwrap();
        assert!(v[1] < 0.99 && v[1] > 0.5);
    }

    #[test]
    fn usd_examples() {
        let pair = binom(2, 1);
        let usd = UsdMeasurement::for_syndrome(&pair, 1.0, 0).unwrap();
        assert!((usd.success_probability() - 1.0).abs() < 1e-12);
        let same = UsdMeasurement::new(&pair.zero, &pair.zero);
        assert!(matches!(same, Err(Error::DegenerateCode(_))));

        // Conclusive outcomes on the input states themselves: E_i never fires
        // on the wrong state and fires with probability 1 - |s| on the right one.
        let pair = cat(0.8);
        let usd = UsdMeasurement::new(&pair.zero, &pair.one).unwrap();
        let hit = |e: &FockVector, u: &FockVector| usd.c * e.inner(u).norm_sqr();
        assert!(hit(&usd.e0, &pair.one) < 1e-14);
        assert!(hit(&usd.e1, &pair.zero) < 1e-14);
        assert!((hit(&usd.e0, &pair.zero) - usd.success_probability()).abs() < 1e-12);
    }

    #[test]
    fn outcome_states_match_dense_projection() {
        let pair = binom(2, 2);
        let eta = 0.93;
        let state = worst_case_state(&pair, eta, 0).unwrap();
        let usd = UsdMeasurement::for_syndrome(&pair, eta, 0).unwrap();
        let [sigma0, _] = usd.outcome_states(&state).unwrap();
        let fd = state.cutoff() + 1;
        let rho = state.density_matrix();
        for a in 0..4 {
            for b in 0..4 {
                let mut acc = ZERO;
                for n in 0..fd {
                    for k in 0..fd {
                        acc += usd.e0.amplitude(n).conj()
                            * rho[(a * fd + n, b * fd + k)]
                            * usd.e0.amplitude(k);
                    }
                }
                assert!((acc * usd.c - sigma0[(a, b)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn bound_states_are_valid_density_operators() {
        let pair = binom(2, 2);
        for state in [
            worst_case_state(&pair, 0.9, 0).unwrap(),
            overlap_bound_state(&pair, 0.9, 1).unwrap(),
            proportional_state(&pair, 0.9, 0).unwrap(),
        ] {
            assert!((state.trace() - 1.0).abs() < 1e-9);
            assert!(state.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn fidelity_of_reduced_field_states() {
        let pair = cat(1.0);
        let a = joint_state(&pair).unwrap().reduced_field();
        assert!((uhlmann_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-8);
    }
}
