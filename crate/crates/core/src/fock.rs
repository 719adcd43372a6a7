//! Truncated Fock-space linear algebra.
//!
//! A single bosonic mode is represented on the basis `|0>, .., |N>` where `N`
//! is the cutoff. Kets, operators and density operators all carry their
//! cutoff implicitly through their dimension (`N + 1`).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const DEFAULT_CUTOFF: usize = 40;

/// Rows/columns within this many levels of the cutoff are excluded from
/// unitarity checks of truncated exponentials.
pub const UNITARITY_MARGIN: usize = 5;

/// Largest admissible relative weight on the top Fock level.
pub const TAIL_TOLERANCE: f64 = 1e-8;

pub const NORM_TOLERANCE: f64 = 1e-10;
const HERMITIAN_TOLERANCE: f64 = 1e-10;
const EIGEN_FLOOR: f64 = -1e-9;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Complex amplitudes over the Fock basis `|0> .. |cutoff>`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: Vec<C64>,
}

impl FockVector {
    pub fn zeros(cutoff: usize) -> Self {
        Self {
            amps: vec![ZERO; cutoff + 1],
        }
    }

    /// Wraps raw amplitudes. An empty vector is rejected since it has no
    /// cutoff.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::DimensionMismatch("empty amplitude vector".into()));
        }
        Ok(Self { amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, n: usize) -> C64 {
        self.amps.get(n).copied().unwrap_or(ZERO)
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(self.scaled(C64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// `self + factor * other`, dimensions must agree.
    pub fn add_scaled(&mut self, factor: C64, other: &FockVector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += factor * b;
        }
    }

    /// Relative weight on the top Fock level.
    pub fn tail_mass(&self) -> f64 {
        let total = self.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        self.amps[self.cutoff()].norm_sqr() / total
    }

    /// Fails with [`Error::CutoffTooSmall`] when the top level carries more
    /// than [`TAIL_TOLERANCE`] of the norm.
    pub fn ensure_tail(&self) -> Result<()> {
        let tail = self.tail_mass();
        if tail >= TAIL_TOLERANCE {
            return Err(Error::CutoffTooSmall {
                cutoff: self.cutoff(),
                tail,
            });
        }
        Ok(())
    }

    /// Drops (or zero-pads) levels so the result has the given cutoff.
    pub fn resized(&self, cutoff: usize) -> Self {
        let mut amps = self.amps.clone();
        amps.resize(cutoff + 1, ZERO);
        Self { amps }
    }
}

/// Square complex matrix acting on a truncated mode.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    m: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m })
    }

    pub fn identity(cutoff: usize) -> Self {
        Self {
            m: DMatrix::identity(cutoff + 1, cutoff + 1),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.m.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn dagger(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn compose(&self, rhs: &OperatorMatrix) -> Self {
        Self {
            m: &self.m * &rhs.m,
        }
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        if v.dim() != self.m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator cutoff {} vs vector cutoff {}",
                self.cutoff(),
                v.cutoff()
            )));
        }
        let amps = (0..self.m.nrows())
            .map(|r| {
                v.amps
                    .iter()
                    .enumerate()
                    .map(|(c, a)| self.m[(r, c)] * a)
                    .sum()
            })
            .collect();
        Ok(FockVector { amps })
    }

    /// `max |(U^dag U - I)_ij|` over the sub-block `i, j <= cutoff - margin`.
    pub fn unitarity_defect(&self, margin: usize) -> f64 {
        let keep = (self.cutoff() + 1).saturating_sub(margin);
        let prod = self.m.adjoint() * &self.m;
        let mut worst = 0.0_f64;
        for i in 0..keep {
            for j in 0..keep {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }
}

/// Hermitian, positive semidefinite matrix on a truncated mode. The trace may
/// be below one for conditional (unnormalized) states.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    m: DMatrix<C64>,
}

impl DensityOperator {
    pub fn from_pure(v: &FockVector) -> Self {
        let col = DMatrix::from_column_slice(v.dim(), 1, v.amplitudes());
        Self {
            m: &col * col.adjoint(),
        }
    }

    /// Checks Hermiticity and the eigenvalue floor before wrapping.
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        let rho = Self {
            m: OperatorMatrix::from_matrix(m)?.m,
        };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        Self { m }
    }

    pub fn cutoff(&self) -> usize {
        self.m.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::InvalidState(format!(
                "trace {tr} cannot be normalized"
            )));
        }
        Ok(Self {
            m: self.m.map(|z| z / tr),
        })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let diff = &self.m - self.m.adjoint();
        diff.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(hermitian_part(&self.m))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "matrix is not Hermitian (defect {herm:.3e})"
            )));
        }
        if let Some(&min) = self.eigenvalues().first() {
            if min < EIGEN_FLOOR {
                return Err(Error::InvalidState(format!(
                    "negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(())
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.m.nrows())
            .map(|n| n as f64 * self.m[(n, n)].re)
            .sum()
    }

    /// `<v| rho |v>`.
    pub fn expectation(&self, v: &FockVector) -> f64 {
        let mut acc = ZERO;
        for (i, a) in v.amplitudes().iter().enumerate() {
            for (j, b) in v.amplitudes().iter().enumerate() {
                acc += a.conj() * self.m[(i, j)] * b;
            }
        }
        acc.re
    }
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Principal square root of a PSD Hermitian matrix, clamping tiny negative
/// eigenvalues to zero.
fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let roots = eig
        .eigenvalues
        .map(|l| if l < 0.0 { 0.0 } else { l.sqrt() });
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * roots[j]);
    scaled * q.adjoint()
}

pub fn basis_state(n: usize, cutoff: usize) -> Result<FockVector> {
    if n > cutoff {
        return Err(Error::OutOfRange { n, cutoff });
    }
    let mut v = FockVector::zeros(cutoff);
    v.amps[n] = ONE;
    Ok(v)
}

pub fn annihilation(cutoff: usize) -> OperatorMatrix {
    let dim = cutoff + 1;
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    OperatorMatrix { m }
}

pub fn creation(cutoff: usize) -> OperatorMatrix {
    annihilation(cutoff).dagger()
}

pub fn number_operator(cutoff: usize) -> OperatorMatrix {
    let dim = cutoff + 1;
    OperatorMatrix {
        m: DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                C64::new(r as f64, 0.0)
            } else {
                ZERO
            }
        }),
    }
}

/// `R(theta) = exp(i theta n)`, diagonal in the Fock basis.
pub fn rotation_operator(theta: f64, cutoff: usize) -> OperatorMatrix {
    let dim = cutoff + 1;
    OperatorMatrix {
        m: DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                C64::from_polar(1.0, theta * r as f64)
            } else {
                ZERO
            }
        }),
    }
}

/// Applies `R(theta)` to a ket without materializing the matrix.
pub fn rotate(v: &FockVector, theta: f64) -> FockVector {
    FockVector {
        amps: v
            .amps
            .iter()
            .enumerate()
            .map(|(n, a)| a * C64::from_polar(1.0, theta * n as f64))
            .collect(),
    }
}

/// `D(alpha) = exp(alpha a^dag - alpha^* a)`, exponentiated on the truncated
/// space. The truncated generator is anti-Hermitian so the result is unitary
/// to round-off; truncation only distorts the columns near the cutoff.
pub fn displacement_operator(alpha: C64, cutoff: usize) -> Result<OperatorMatrix> {
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::Domain(format!("displacement amplitude {alpha}")));
    }
    let a = annihilation(cutoff).m;
    let generator = a.adjoint() * alpha - &a * alpha.conj();
    let op = OperatorMatrix { m: generator.exp() };
    check_vacuum_column(&op)?;
    Ok(op)
}

/// `S(r) = exp(1/2 (r a^dag^2 - r^* a^2))` on the truncated space.
pub fn squeezing_operator(r: f64, cutoff: usize) -> Result<OperatorMatrix> {
    if !r.is_finite() || r.abs() > 2.0 {
        return Err(Error::Domain(format!(
            "squeezing parameter {r} outside |r| <= 2"
        )));
    }
    let a = annihilation(cutoff).m;
    let a2 = &a * &a;
    let generator = (a2.adjoint() - a2).map(|z| z * (0.5 * r));
    let op = OperatorMatrix { m: generator.exp() };
    check_vacuum_column(&op)?;
    Ok(op)
}

fn check_vacuum_column(op: &OperatorMatrix) -> Result<()> {
    let column = FockVector {
        amps: op.m.column(0).iter().copied().collect(),
    };
    column.ensure_tail()
}

/// Closed-form coherent state `e^{-|a|^2/2} sum a^n / sqrt(n!) |n>`.
pub fn coherent_state(alpha: C64, cutoff: usize) -> Result<FockVector> {
    let v = coherent_amplitudes(alpha, cutoff);
    v.ensure_tail()?;
    Ok(v)
}

/// Coherent amplitudes without the cutoff-adequacy check.
pub(crate) fn coherent_amplitudes(alpha: C64, cutoff: usize) -> FockVector {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..=cutoff {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    FockVector { amps }
}

/// `exp(G) v` for a generator given only through its action, by splitting
/// into `steps` Taylor-summed sub-exponentials. `norm_bound` must bound the
/// operator norm of `G`.
pub(crate) fn exp_apply<F>(generator: F, norm_bound: f64, v: &FockVector) -> FockVector
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let steps = norm_bound.ceil().max(1.0) as usize;
    let inv = 1.0 / steps as f64;
    let mut out = v.amps.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        let scale: f64 = acc.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for k in 1..200 {
            term = generator(&term)
                .into_iter()
                .map(|z| z * (inv / k as f64))
                .collect();
            let size: f64 = term.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if size <= 1e-18 * scale.max(1e-300) {
                break;
            }
        }
        out = acc;
    }
    FockVector { amps: out }
}

/// `(alpha a^dag - alpha^* a) v` in the basis of `v`.
pub(crate) fn displacement_generator(alpha: C64) -> impl Fn(&[C64]) -> Vec<C64> {
    move |v: &[C64]| {
        let dim = v.len();
        let mut out = vec![ZERO; dim];
        for n in 0..dim {
            if n + 1 < dim {
                // a^dag |n> = sqrt(n+1) |n+1>
                out[n + 1] += alpha * (((n + 1) as f64).sqrt()) * v[n];
            }
            if n >= 1 {
                out[n - 1] -= alpha.conj() * (n as f64).sqrt() * v[n];
            }
        }
        out
    }
}

/// `1/2 (r a^dag^2 - r a^2) v` for real `r`.
pub(crate) fn squeezing_generator(r: f64) -> impl Fn(&[C64]) -> Vec<C64> {
    move |v: &[C64]| {
        let dim = v.len();
        let mut out = vec![ZERO; dim];
        for n in 0..dim {
            if n + 2 < dim {
                let c = (((n + 1) * (n + 2)) as f64).sqrt();
                out[n + 2] += v[n] * (0.5 * r * c);
            }
            if n >= 2 {
                let c = ((n * (n - 1)) as f64).sqrt();
                out[n - 2] -= v[n] * (0.5 * r * c);
            }
        }
        out
    }
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, clamped to
/// `[0, 1]`.
pub fn uhlmann_fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.cutoff() != sigma.cutoff() {
        return Err(Error::DimensionMismatch(format!(
            "cutoffs {} and {}",
            rho.cutoff(),
            sigma.cutoff()
        )));
    }
    rho.validate()?;
    sigma.validate()?;
    let root = psd_sqrt(&rho.m);
    let inner = &root * &sigma.m * &root;
    let eig = SymmetricEigen::new(hermitian_part(&inner));
    let tr: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// `sum n |c_n|^2` of a normalized ket.
pub fn mean_photon_number(v: &FockVector) -> Result<f64> {
    if !v.is_normalized() {
        return Err(Error::NotNormalized {
            norm_sqr: v.norm_sqr(),
        });
    }
    Ok(v.amps
        .iter()
        .enumerate()
        .map(|(n, a)| n as f64 * a.norm_sqr())
        .sum())
}
