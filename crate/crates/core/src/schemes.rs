//! Generation of entangled N-photon states `sum_k c_k |N-k, k>`.
//!
//! Three schemes are covered:
//!
//! - single step: one atom passes through a cavity prepared in a given field
//!   state; probabilities follow from the branch coefficient matrices;
//! - conditional: excited atoms pass through an initially empty cavity and
//!   each is detected in the ground state, so every kept step adds one photon
//!   to quasi-mode one;
//! - non-conditional: the same atoms are not detected; the field ends up
//!   diagonal in the quasi-mode states `||2j, 0>>` with weights given by a
//!   two-term recursion.
//!
//! Every closed form here has a simulation counterpart (`*_simulated`) built
//! only from [`evolve`], [`reduced_field_density`] and
//! [`atom_detection_collapse`].

use std::fmt;

use nalgebra::DVector;

use crate::evolution::{atom_detection_collapse, branch_matrices, evolve, reduced_field_density};
use crate::fock::{AtomFieldState, AtomLevel, FieldDensityOperator, Mode, ModeFockLabel, TwoModeState, NORM_TOL};
use crate::quasimode::BasisTransform;
use crate::wigner::{big_d, CouplingConfig};
use crate::{Error, Result, C64};

/// Normalization tolerance applied to input field states.
const INPUT_NORM_TOL: f64 = 1e-9;

/// `|Psi_N> = sum_k c_k |N-k, k>`; the same coefficients read as
/// `c~_{N/2, m}` with `m = N/2 - k` in the Schwinger basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    n: u32,
    coefficients: Vec<C64>,
}

impl TargetState {
    pub fn new(n: u32, coefficients: Vec<C64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("target photon number must be positive".into()));
        }
        if coefficients.len() != n as usize + 1 {
            return Err(Error::LengthMismatch {
                expected: n as usize + 1,
                found: coefficients.len(),
            });
        }
        let norm_sqr: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { n, coefficients })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    /// The target as a mode-basis field state with the given cutoff.
    pub fn to_state(&self, cutoff: u32) -> Result<TwoModeState<Mode>> {
        TwoModeState::from_components(
            cutoff,
            self.coefficients
                .iter()
                .enumerate()
                .map(|(k, c)| (ModeFockLabel::new(self.n - k as u32, k as u32), *c)),
        )
    }

    /// `<Psi_N|v>` for a vector `v` over the N-photon block.
    fn overlap(&self, v: &[C64]) -> C64 {
        self.coefficients.iter().zip(v).map(|(c, a)| c.conj() * a).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellSign {
    Plus,
    Minus,
}

impl BellSign {
    pub fn value(self) -> f64 {
        match self {
            BellSign::Plus => 1.0,
            BellSign::Minus => -1.0,
        }
    }
}

impl fmt::Display for BellSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BellSign::Plus => "+",
            BellSign::Minus => "-",
        })
    }
}

/// `(|N,0> +- |0,N>)/sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BellTarget {
    n: u32,
    sign: BellSign,
}

impl BellTarget {
    pub fn new(n: u32, sign: BellSign) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("Bell target needs at least one photon".into()));
        }
        Ok(Self { n, sign })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn sign(&self) -> BellSign {
        self.sign
    }
}

impl From<BellTarget> for TargetState {
    fn from(bell: BellTarget) -> Self {
        let mut coefficients = vec![C64::new(0.0, 0.0); bell.n as usize + 1];
        let a = std::f64::consts::FRAC_1_SQRT_2;
        coefficients[0] = C64::new(a, 0.0);
        coefficients[bell.n as usize] = C64::new(bell.sign.value() * a, 0.0);
        Self { n: bell.n, coefficients }
    }
}

/// Either a general N-photon target or a Bell state, which has its own
/// closed forms.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    General(TargetState),
    Bell(BellTarget),
}

impl Target {
    pub fn n(&self) -> u32 {
        match self {
            Target::General(t) => t.n(),
            Target::Bell(b) => b.n(),
        }
    }

    pub fn to_target_state(&self) -> TargetState {
        match self {
            Target::General(t) => t.clone(),
            Target::Bell(b) => (*b).into(),
        }
    }
}

impl From<TargetState> for Target {
    fn from(t: TargetState) -> Self {
        Target::General(t)
    }
}

impl From<BellTarget> for Target {
    fn from(b: BellTarget) -> Self {
        Target::Bell(b)
    }
}

fn check_field(field: &TwoModeState<Mode>, n: u32) -> Result<()> {
    if !field.is_normalized(INPUT_NORM_TOL) {
        return Err(Error::NotNormalized {
            norm_sqr: field.norm_sqr(),
        });
    }
    if field.cutoff() < n + 1 {
        return Err(Error::InsufficientHeadroom {
            occupied: n,
            cutoff: field.cutoff(),
        });
    }
    Ok(())
}

fn block_or_zero(field: &TwoModeState<Mode>, total: u32) -> DVector<C64> {
    if total <= field.cutoff() {
        DVector::from_column_slice(field.block(total))
    } else {
        DVector::zeros(total as usize + 1)
    }
}

/// Probability of finding the field in `target` after one atom prepared in
/// `atom` interacts for `tau` with the field `initial_field`, from the
/// coefficient matrices: the N-photon block through `C` (`C_bar`) plus the
/// block with one photon less (more) through `S` (`S_bar`).
pub fn single_step_probability(
    initial_field: &TwoModeState<Mode>,
    atom: AtomLevel,
    target: &TargetState,
    tau: f64,
    transform: &BasisTransform,
) -> Result<f64> {
    let n = target.n();
    check_field(initial_field, n)?;
    let same = block_or_zero(initial_field, n);
    let m = branch_matrices(n, tau, transform)?;
    let (keep, moved) = match atom {
        AtomLevel::Excited => {
            let s = branch_matrices(n - 1, tau, transform)?.s;
            (&m.c * &same, s * block_or_zero(initial_field, n - 1))
        }
        AtomLevel::Ground => {
            let s_bar = branch_matrices(n + 1, tau, transform)?.s_bar;
            (&m.c_bar * &same, s_bar * block_or_zero(initial_field, n + 1))
        }
    };
    Ok(target.overlap(keep.as_slice()).norm_sqr() + target.overlap(moved.as_slice()).norm_sqr())
}

/// [`single_step_probability`] via `tr(rho_F(tau) |Psi><Psi|)` with the
/// joint state evolved explicitly.
pub fn single_step_probability_simulated(
    initial_field: &TwoModeState<Mode>,
    atom: AtomLevel,
    target: &TargetState,
    tau: f64,
    transform: &BasisTransform,
) -> Result<f64> {
    check_field(initial_field, target.n())?;
    let joint = AtomFieldState::product(atom, initial_field.clone());
    let rho = reduced_field_density(&evolve(&joint, tau, transform)?);
    rho.expectation(&target.to_state(initial_field.cutoff())?)
}

/// Atom-field Fock states that can feed an N-photon target in one step.
pub fn contributing_fock_set(n: u32, atom: AtomLevel) -> Result<Vec<ModeFockLabel>> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let row = |total: u32| (0..=total).map(move |k| ModeFockLabel::new(total - k, k));
    let other = match atom {
        AtomLevel::Excited => n - 1,
        AtomLevel::Ground => n + 1,
    };
    Ok(row(n).chain(row(other)).collect())
}

/// Bell-state probabilities for the initial state `|e; N, 0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellProbabilities {
    /// `(p+, p-)` for the N-photon Bell states; `None` for `N = 0`.
    pub same_n: Option<(f64, f64)>,
    /// `(p+, p-)` for the (N+1)-photon Bell states.
    pub next_n: (f64, f64),
}

pub fn bell_probabilities_from_n00(n: u32, tau: f64, transform: &BasisTransform) -> Result<BellProbabilities> {
    let m = branch_matrices(n, tau, transform)?;
    let pair = |a: C64, b: C64| (0.5 * (a + b).norm_sqr(), 0.5 * (a - b).norm_sqr());
    let last = n as usize;
    Ok(BellProbabilities {
        same_n: (n > 0).then(|| pair(m.c[(0, 0)], m.c[(last, 0)])),
        next_n: pair(m.s[(0, 0)], m.s[(last + 1, 0)]),
    })
}

/// Same probabilities from the explicitly evolved joint state.
pub fn bell_probabilities_simulated(n: u32, tau: f64, transform: &BasisTransform) -> Result<BellProbabilities> {
    let cutoff = n + 1;
    let joint = AtomFieldState::basis_state(AtomLevel::Excited, ModeFockLabel::new(n, 0), cutoff)?;
    let rho = reduced_field_density(&evolve(&joint, tau, transform)?);
    let probs = |photons: u32| -> Result<(f64, f64)> {
        let plus = TargetState::from(BellTarget::new(photons, BellSign::Plus)?).to_state(cutoff)?;
        let minus = TargetState::from(BellTarget::new(photons, BellSign::Minus)?).to_state(cutoff)?;
        Ok((rho.expectation(&plus)?, rho.expectation(&minus)?))
    };
    Ok(BellProbabilities {
        same_n: if n > 0 { Some(probs(n)?) } else { None },
        next_n: probs(n + 1)?,
    })
}

/// `||N, 0>>` expanded in the mode basis: the amplitude on `|N-k, k>` is
/// `D^{(N/2)}_{N/2-k, N/2}`. The cutoff is `N`.
pub fn conditional_state(n: u32, couplings: &CouplingConfig) -> Result<TwoModeState<Mode>> {
    let euler = couplings.euler();
    let column = (0..=n)
        .map(|k| Ok((ModeFockLabel::new(n - k, k), big_d(n, n as i32 - 2 * k as i32, n as i32, &euler)?)))
        .collect::<Result<Vec<_>>>()?;
    TwoModeState::from_components(n, column)
}

/// `|<Psi_N|chi_N>|^2` for the state left after N conditional steps.
pub fn conditional_overlap(target: &Target, n: u32, couplings: &CouplingConfig) -> Result<f64> {
    if target.n() != n {
        return Err(Error::PhotonNumberMismatch {
            expected: n,
            found: target.n(),
        });
    }
    let euler = couplings.euler();
    let d = |k: u32| big_d(n, n as i32 - 2 * k as i32, n as i32, &euler);
    match target {
        Target::Bell(b) => {
            let (top, bottom) = (d(0)?, d(n)?);
            Ok(0.5 * (top + bottom * b.sign().value()).norm_sqr())
        }
        Target::General(t) => {
            let column = (0..=n).map(d).collect::<Result<Vec<_>>>()?;
            Ok(t.overlap(&column).norm_sqr())
        }
    }
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("interaction time"));
    }
    Ok(())
}

/// Probability that atom `l` (1-based) of a sequence is found in the ground
/// state every time: `prod_l sin^2(tau_l sqrt(l))`.
pub fn conditional_success_probability(taus: &[f64]) -> f64 {
    taus.iter()
        .enumerate()
        .map(|(i, t)| (t * ((i + 1) as f64).sqrt()).sin().powi(2))
        .product()
}

/// The interaction times `tau_l = pi / (2 sqrt(l))`, `l = 1..=n`, for which
/// every atom deposits its photon with certainty.
pub fn deterministic_schedule(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|l| std::f64::consts::FRAC_PI_2 / (l as f64).sqrt())
        .collect()
}

/// Runs the conditional scheme with the given times, keeping only ground
/// detections. Returns the final field and the product of the detection
/// probabilities.
pub fn run_conditional_sequence(taus: &[f64], couplings: &CouplingConfig) -> Result<(TwoModeState<Mode>, f64)> {
    run_detected_sequence(taus, &vec![AtomLevel::Ground; taus.len()], couplings)
}

/// Like [`run_conditional_sequence`] but conditioned on an arbitrary
/// sequence of detection outcomes. Returns the final field and the joint
/// probability of the outcomes.
pub fn run_detected_sequence(
    taus: &[f64],
    outcomes: &[AtomLevel],
    couplings: &CouplingConfig,
) -> Result<(TwoModeState<Mode>, f64)> {
    check_taus(taus)?;
    if outcomes.len() != taus.len() {
        return Err(Error::LengthMismatch {
            expected: taus.len(),
            found: outcomes.len(),
        });
    }
    let cutoff = taus.len() as u32;
    let transform = BasisTransform::build(couplings, cutoff)?;
    let mut field = TwoModeState::vacuum(cutoff);
    let mut probability = 1.0;
    for (&tau, &outcome) in taus.iter().zip(outcomes) {
        let joint = AtomFieldState::product(AtomLevel::Excited, field);
        let (next, p) = atom_detection_collapse(&evolve(&joint, tau, &transform)?, outcome)?;
        field = next;
        probability *= p;
    }
    Ok((field, probability))
}

/// Weights `p_j^{(n)}` of the non-conditional field state
/// `sum_j p_j ||2j,0>><<2j,0||`, indexed by `2j = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonConditionalWeights {
    taus: Vec<f64>,
    weights: Vec<f64>,
}

impl NonConditionalWeights {
    pub fn steps(&self) -> usize {
        self.taus.len()
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `p_j` for `2j = twice_j`; zero beyond `n`.
    pub fn weight(&self, twice_j: u32) -> f64 {
        self.weights.get(twice_j as usize).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `p_j^{(n)} = cos^2(tau_n sqrt(2j+1)) p_j^{(n-1)} + sin^2(tau_n sqrt(2j)) p_{j-1/2}^{(n-1)}`
/// starting from `p_0^{(0)} = 1`.
pub fn nonconditional_weights(taus: &[f64]) -> Result<NonConditionalWeights> {
    check_taus(taus)?;
    let mut p = vec![1.0];
    for &tau in taus {
        let mut next = vec![0.0; p.len() + 1];
        for (k, &w) in p.iter().enumerate() {
            let x = tau * ((k + 1) as f64).sqrt();
            next[k] += x.cos().powi(2) * w;
            next[k + 1] += x.sin().powi(2) * w;
        }
        p = next;
    }
    Ok(NonConditionalWeights {
        taus: taus.to_vec(),
        weights: p,
    })
}

/// Probability of `target` after the non-conditional sequence: the
/// conditional overlap times `p_{N/2}^{(n)}`.
pub fn nonconditional_probability(target: &Target, taus: &[f64], couplings: &CouplingConfig) -> Result<f64> {
    let n = target.n();
    if taus.len() < n as usize {
        return Err(Error::TooFewSteps {
            steps: taus.len(),
            photons: n,
        });
    }
    let weights = nonconditional_weights(taus)?;
    Ok(conditional_overlap(target, n, couplings)? * weights.weight(n))
}

/// One branch of the undetected sequence: the outcomes that would have been
/// seen and the unnormalized field left behind (its squared norm is the
/// branch probability).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub outcomes: Vec<AtomLevel>,
    pub field: TwoModeState<Mode>,
}

/// Unravels the non-conditional sequence into all `2^n` outcome branches by
/// evolving each branch with a fresh excited atom and splitting on the atomic
/// level. Field cutoff is `n`.
pub fn simulate_trajectories(taus: &[f64], couplings: &CouplingConfig) -> Result<Vec<Trajectory>> {
    check_taus(taus)?;
    let cutoff = taus.len() as u32;
    let transform = BasisTransform::build(couplings, cutoff)?;
    let mut branches = vec![Trajectory {
        outcomes: Vec::new(),
        field: TwoModeState::vacuum(cutoff),
    }];
    for &tau in taus {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for b in branches {
            let joint = AtomFieldState::product(AtomLevel::Excited, b.field);
            let (excited, ground) = evolve(&joint, tau, &transform)?.into_parts();
            for (level, field) in [(AtomLevel::Excited, excited), (AtomLevel::Ground, ground)] {
                let mut outcomes = b.outcomes.clone();
                outcomes.push(level);
                next.push(Trajectory { outcomes, field });
            }
        }
        branches = next;
    }
    Ok(branches)
}

/// Field density operator after the undetected sequence: each step evolves
/// every ensemble member with a fresh excited atom and traces the atom out.
pub fn nonconditional_density(taus: &[f64], couplings: &CouplingConfig) -> Result<FieldDensityOperator<Mode>> {
    let trajectories = simulate_trajectories(taus, couplings)?;
    FieldDensityOperator::from_ensemble(taus.len() as u32, trajectories.iter().map(|t| &t.field))
}

/// [`nonconditional_probability`] from the simulated density operator.
pub fn nonconditional_probability_simulated(
    target: &Target,
    taus: &[f64],
    couplings: &CouplingConfig,
) -> Result<f64> {
    let n = target.n();
    if taus.len() < n as usize {
        return Err(Error::TooFewSteps {
            steps: taus.len(),
            photons: n,
        });
    }
    let rho = nonconditional_density(taus, couplings)?;
    rho.expectation(&target.to_target_state().to_state(rho.cutoff())?)
}
