//! Two-mode Fock-state bookkeeping.
//!
//! Amplitudes are stored densely over the simplex `n1 + n2 <= cutoff`. The
//! enumeration runs over the total photon number `n = n1 + n2 = 2j` and,
//! within a block, over `m` descending (equivalently `n2` ascending):
//!
//! ```text
//! |0,0>, |1,0>, |0,1>, |2,0>, |1,1>, |0,2>, ...
//! ```
//!
//! so the label `|n1,n2>` sits at `n(n+1)/2 + n2`. Every per-block matrix in
//! this crate uses the same in-block order, which makes a block slice of a
//! state directly multipliable by a Wigner block.
//!
//! States carry their basis (mode or quasi-mode) as a type parameter so that
//! mixing amplitudes from different bases does not compile.

use std::fmt;
use std::marker::PhantomData;

use nalgebra::DMatrix;

use crate::{Error, Result, C64};

/// Normalization tolerance for analytically constructed states.
pub const NORM_TOL: f64 = 1e-12;
/// Normalization tolerance after time evolution.
pub const EVOLVED_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeFockLabel {
    pub n1: u32,
    pub n2: u32,
}

impl ModeFockLabel {
    pub const fn new(n1: u32, n2: u32) -> Self {
        Self { n1, n2 }
    }

    pub const fn total(&self) -> u32 {
        self.n1 + self.n2
    }

    /// Position in the dense enumeration.
    pub const fn index(&self) -> usize {
        block_offset(self.total()) + self.n2 as usize
    }

    pub fn from_index(index: usize) -> Self {
        // largest n with n(n+1)/2 <= index
        let mut n = ((((8 * index + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
        while block_offset(n as u32 + 1) <= index {
            n += 1;
        }
        while block_offset(n as u32) > index {
            n -= 1;
        }
        let n2 = (index - block_offset(n as u32)) as u32;
        Self::new(n as u32 - n2, n2)
    }
}

impl fmt::Display for ModeFockLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}>", self.n1, self.n2)
    }
}

/// Angular-momentum relabeling `j = (n1+n2)/2`, `m = (n1-n2)/2`, stored as
/// the integers `2j` and `2m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchwingerLabel {
    twice_j: u32,
    twice_m: i32,
}

impl SchwingerLabel {
    pub fn new(twice_j: u32, twice_m: i32) -> Result<Self> {
        let j = twice_j as i64;
        let m = twice_m as i64;
        if m.abs() > j || (j - m) % 2 != 0 {
            return Err(Error::InvalidSchwingerLabel {
                twice_j: j,
                twice_m: m,
            });
        }
        Ok(Self { twice_j, twice_m })
    }

    /// Builds a label from `j` and `m` given as (half-)integers.
    pub fn from_values(j: f64, m: f64) -> Result<Self> {
        let (tj, tm) = (2.0 * j, 2.0 * m);
        if tj.fract() != 0.0 || tm.fract() != 0.0 || tj < 0.0 || !tj.is_finite() || !tm.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "({j}, {m}) is not a pair of half-integers"
            )));
        }
        Self::new(tj as u32, tm as i32)
    }

    pub const fn twice_j(&self) -> u32 {
        self.twice_j
    }

    pub const fn twice_m(&self) -> i32 {
        self.twice_m
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn m(&self) -> f64 {
        self.twice_m as f64 / 2.0
    }
}

impl fmt::Display for SchwingerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}>_S", self.j(), self.m())
    }
}

pub fn schwinger_from_fock(label: ModeFockLabel) -> SchwingerLabel {
    SchwingerLabel {
        twice_j: label.n1 + label.n2,
        twice_m: label.n1 as i32 - label.n2 as i32,
    }
}

pub fn fock_from_schwinger(label: SchwingerLabel) -> ModeFockLabel {
    let j = label.twice_j as i32;
    let m = label.twice_m;
    ModeFockLabel::new(((j + m) / 2) as u32, ((j - m) / 2) as u32)
}

impl From<ModeFockLabel> for SchwingerLabel {
    fn from(label: ModeFockLabel) -> Self {
        schwinger_from_fock(label)
    }
}

impl From<SchwingerLabel> for ModeFockLabel {
    fn from(label: SchwingerLabel) -> Self {
        fock_from_schwinger(label)
    }
}

/// Index of the first label with `n1 + n2 = total`.
pub const fn block_offset(total: u32) -> usize {
    let n = total as usize;
    n * (n + 1) / 2
}

/// Number of labels with `n1 + n2 <= cutoff`.
pub const fn dimension(cutoff: u32) -> usize {
    block_offset(cutoff + 1)
}

/// All labels within the cutoff, in storage order.
pub fn labels(cutoff: u32) -> impl Iterator<Item = ModeFockLabel> {
    (0..=cutoff).flat_map(|n| (0..=n).map(move |n2| ModeFockLabel::new(n - n2, n2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisTag {
    Mode,
    QuasiMode,
}

pub trait Basis: Copy + fmt::Debug + PartialEq + Send + Sync + 'static {
    const TAG: BasisTag;
}

/// Physical mode Fock basis `|n1,n2>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode;

/// Quasi-mode Fock basis `||n1,n2>>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuasiMode;

impl Basis for Mode {
    const TAG: BasisTag = BasisTag::Mode;
}

impl Basis for QuasiMode {
    const TAG: BasisTag = BasisTag::QuasiMode;
}

/// Amplitude vector on the truncated two-mode Fock space.
///
/// Not necessarily normalized: branch operators and projections produce
/// sub-normalized vectors, which is why normalization is checked where it is
/// a precondition rather than at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState<B: Basis> {
    cutoff: u32,
    amplitudes: Vec<C64>,
    basis: PhantomData<B>,
}

impl<B: Basis> TwoModeState<B> {
    pub fn zeros(cutoff: u32) -> Self {
        Self {
            cutoff,
            amplitudes: vec![C64::new(0.0, 0.0); dimension(cutoff)],
            basis: PhantomData,
        }
    }

    pub fn vacuum(cutoff: u32) -> Self {
        let mut s = Self::zeros(cutoff);
        s.amplitudes[0] = C64::new(1.0, 0.0);
        s
    }

    pub fn basis_state(label: ModeFockLabel, cutoff: u32) -> Result<Self> {
        check_label(label, cutoff)?;
        let mut s = Self::zeros(cutoff);
        s.amplitudes[label.index()] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(cutoff: u32, amplitudes: Vec<C64>) -> Result<Self> {
        let expected = dimension(cutoff);
        if amplitudes.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            cutoff,
            amplitudes,
            basis: PhantomData,
        })
    }

    /// Sums the given components; repeated labels accumulate.
    pub fn from_components<I>(cutoff: u32, components: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ModeFockLabel, C64)>,
    {
        let mut s = Self::zeros(cutoff);
        for (label, amp) in components {
            check_label(label, cutoff)?;
            s.amplitudes[label.index()] += amp;
        }
        Ok(s)
    }

    pub fn basis_tag(&self) -> BasisTag {
        B::TAG
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    /// Amplitude of a label; zero outside the cutoff.
    pub fn amplitude(&self, label: ModeFockLabel) -> C64 {
        if label.total() > self.cutoff {
            C64::new(0.0, 0.0)
        } else {
            self.amplitudes[label.index()]
        }
    }

    /// Amplitudes with `n1 + n2 = total`, ordered by `n2` ascending.
    pub fn block(&self, total: u32) -> &[C64] {
        let start = block_offset(total);
        &self.amplitudes[start..start + total as usize + 1]
    }

    pub(crate) fn block_mut(&mut self, total: u32) -> &mut [C64] {
        let start = block_offset(total);
        &mut self.amplitudes[start..start + total as usize + 1]
    }

    pub fn block_norm_sqr(&self, total: u32) -> f64 {
        if total > self.cutoff {
            return 0.0;
        }
        self.block(total).iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: n * n });
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            cutoff: self.cutoff,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            basis: PhantomData,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_cutoff(self.cutoff, other.cutoff)?;
        Ok(Self {
            cutoff: self.cutoff,
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
            basis: PhantomData,
        })
    }

    /// Hermitian inner product `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        same_cutoff(self.cutoff, other.cutoff)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Highest total photon number carrying a nonzero amplitude.
    pub fn max_occupied_total(&self) -> Option<u32> {
        (0..=self.cutoff)
            .rev()
            .find(|&n| self.block(n).iter().any(|a| *a != C64::new(0.0, 0.0)))
    }

    /// Re-embeds the state with a different cutoff. Shrinking fails if any
    /// dropped amplitude is nonzero.
    pub fn with_cutoff(&self, cutoff: u32) -> Result<Self> {
        let mut out = Self::zeros(cutoff);
        let keep = dimension(cutoff.min(self.cutoff));
        out.amplitudes[..keep].copy_from_slice(&self.amplitudes[..keep]);
        if cutoff < self.cutoff {
            if let Some(idx) = self.amplitudes[keep..]
                .iter()
                .position(|a| *a != C64::new(0.0, 0.0))
            {
                let label = ModeFockLabel::from_index(keep + idx);
                return Err(Error::CutoffExceeded {
                    n1: label.n1,
                    n2: label.n2,
                    cutoff,
                });
            }
        }
        Ok(out)
    }

    /// Nonzero components in storage order.
    pub fn components(&self) -> impl Iterator<Item = (ModeFockLabel, C64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != C64::new(0.0, 0.0))
            .map(|(i, a)| (ModeFockLabel::from_index(i), *a))
    }
}

pub fn make_basis_state(label: ModeFockLabel, cutoff: u32) -> Result<TwoModeState<Mode>> {
    TwoModeState::basis_state(label, cutoff)
}

pub fn inner_product<B: Basis>(a: &TwoModeState<B>, b: &TwoModeState<B>) -> Result<C64> {
    a.inner(b)
}

fn check_label(label: ModeFockLabel, cutoff: u32) -> Result<()> {
    if label.total() > cutoff {
        return Err(Error::CutoffExceeded {
            n1: label.n1,
            n2: label.n2,
            cutoff,
        });
    }
    Ok(())
}

fn same_cutoff(left: u32, right: u32) -> Result<()> {
    if left != right {
        return Err(Error::CutoffMismatch { left, right });
    }
    Ok(())
}

/// Max elementwise distance between `a` and `b` after rotating `b` by the
/// global phase that best aligns it with `a`.
pub fn phase_aligned_max_deviation(a: &[C64], b: &[C64]) -> f64 {
    let overlap: C64 = b.iter().zip(a).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y * phase).norm())
        .fold(0.0, f64::max)
}

/// Density operator on the truncated two-mode field space.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDensityOperator<B: Basis> {
    cutoff: u32,
    matrix: DMatrix<C64>,
    basis: PhantomData<B>,
}

impl<B: Basis> FieldDensityOperator<B> {
    pub fn zeros(cutoff: u32) -> Self {
        let d = dimension(cutoff);
        Self {
            cutoff,
            matrix: DMatrix::zeros(d, d),
            basis: PhantomData,
        }
    }

    pub fn from_matrix(cutoff: u32, matrix: DMatrix<C64>) -> Result<Self> {
        let d = dimension(cutoff);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::LengthMismatch {
                expected: d * d,
                found: matrix.len(),
            });
        }
        Ok(Self {
            cutoff,
            matrix,
            basis: PhantomData,
        })
    }

    /// `|psi><psi|`, without renormalizing `psi`.
    pub fn from_pure(state: &TwoModeState<B>) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self {
            cutoff: state.cutoff(),
            matrix: &v * v.adjoint(),
            basis: PhantomData,
        }
    }

    /// `sum_k |psi_k><psi_k|` over unnormalized ensemble members.
    pub fn from_ensemble<'a, I>(cutoff: u32, members: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TwoModeState<B>>,
    {
        let mut rho = Self::zeros(cutoff);
        for m in members {
            same_cutoff(cutoff, m.cutoff())?;
            let v = nalgebra::DVector::from_column_slice(m.amplitudes());
            rho.matrix += &v * v.adjoint();
        }
        Ok(rho)
    }

    pub fn basis_tag(&self) -> BasisTag {
        B::TAG
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn element(&self, row: ModeFockLabel, col: ModeFockLabel) -> C64 {
        if row.total() > self.cutoff || col.total() > self.cutoff {
            return C64::new(0.0, 0.0);
        }
        self.matrix[(row.index(), col.index())]
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Largest entry of `rho - rho^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        let diff = &self.matrix - self.matrix.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `<psi|rho|psi>`.
    pub fn expectation(&self, state: &TwoModeState<B>) -> Result<f64> {
        same_cutoff(self.cutoff, state.cutoff())?;
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)].re)
    }

    /// Checks Hermiticity, unit trace and positivity at the given tolerances.
    pub fn validate(&self, tol: f64, eig_floor: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        let tr = self.trace();
        let min_ev = self.eigenvalues().first().copied().unwrap_or(0.0);
        if herm > tol || (tr.re - 1.0).abs() > tol || tr.im.abs() > tol || min_ev < -eig_floor {
            return Err(Error::InvalidArgument(format!(
                "not a density operator: hermiticity error {herm:e}, trace {tr}, min eigenvalue {min_ev:e}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AtomLevel {
    Excited,
    Ground,
}

impl fmt::Display for AtomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AtomLevel::Excited => "e",
            AtomLevel::Ground => "g",
        })
    }
}

/// Joint atom-field state `|e>|excited> + |g>|ground>` in the mode basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomFieldState {
    excited: TwoModeState<Mode>,
    ground: TwoModeState<Mode>,
}

impl AtomFieldState {
    pub fn new(excited: TwoModeState<Mode>, ground: TwoModeState<Mode>) -> Result<Self> {
        same_cutoff(excited.cutoff(), ground.cutoff())?;
        Ok(Self { excited, ground })
    }

    /// `|level> (x) |field>`.
    pub fn product(level: AtomLevel, field: TwoModeState<Mode>) -> Self {
        let zero = TwoModeState::zeros(field.cutoff());
        match level {
            AtomLevel::Excited => Self {
                excited: field,
                ground: zero,
            },
            AtomLevel::Ground => Self {
                excited: zero,
                ground: field,
            },
        }
    }

    /// `|level; n1, n2>`.
    pub fn basis_state(level: AtomLevel, label: ModeFockLabel, cutoff: u32) -> Result<Self> {
        Ok(Self::product(level, TwoModeState::basis_state(label, cutoff)?))
    }

    pub fn excited(&self) -> &TwoModeState<Mode> {
        &self.excited
    }

    pub fn ground(&self) -> &TwoModeState<Mode> {
        &self.ground
    }

    pub fn part(&self, level: AtomLevel) -> &TwoModeState<Mode> {
        match level {
            AtomLevel::Excited => &self.excited,
            AtomLevel::Ground => &self.ground,
        }
    }

    pub fn into_parts(self) -> (TwoModeState<Mode>, TwoModeState<Mode>) {
        (self.excited, self.ground)
    }

    pub fn cutoff(&self) -> u32 {
        self.excited.cutoff()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.excited.norm_sqr() + self.ground.norm_sqr()
    }

    pub fn with_cutoff(&self, cutoff: u32) -> Result<Self> {
        Ok(Self {
            excited: self.excited.with_cutoff(cutoff)?,
            ground: self.ground.with_cutoff(cutoff)?,
        })
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: n * n });
        }
        let f = C64::new(1.0 / n, 0.0);
        Ok(Self {
            excited: self.excited.scaled(f),
            ground: self.ground.scaled(f),
        })
    }

    /// Excited amplitudes followed by ground amplitudes.
    pub fn to_vec(&self) -> Vec<C64> {
        let mut v = self.excited.amplitudes().to_vec();
        v.extend_from_slice(self.ground.amplitudes());
        v
    }

    pub fn from_vec(cutoff: u32, v: &[C64]) -> Result<Self> {
        let d = dimension(cutoff);
        if v.len() != 2 * d {
            return Err(Error::LengthMismatch {
                expected: 2 * d,
                found: v.len(),
            });
        }
        Self::new(
            TwoModeState::from_amplitudes(cutoff, v[..d].to_vec())?,
            TwoModeState::from_amplitudes(cutoff, v[d..].to_vec())?,
        )
    }
}
