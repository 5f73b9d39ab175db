//! Interaction-picture time evolution `U(tau) = exp(-i H_int tau / (hbar g))`.
//!
//! In the quasi-mode basis only quasi-mode one couples to the atom and `U`
//! acts on `||n_A1, n_A2>>` like a one-mode JC propagator:
//!
//! ```text
//! U_ee ||j,m>> = cos(tau sqrt(j+m+1)) ||j,m>>
//! U_ge ||j,m>> = -i sin(tau sqrt(j+m+1)) ||j+1/2, m+1/2>>
//! U_eg ||j,m>> = -i sin(tau sqrt(j+m)) ||j-1/2, m-1/2>>
//! U_gg ||j,m>> = cos(tau sqrt(j+m)) ||j,m>>
//! ```
//!
//! where `j + m = n_A1`. In storage order the quasi-mode label at position
//! `k` of block `n` has `n_A1 = n - k`, so `U_ge` moves amplitude from
//! `(n, k)` to `(n+1, k)`.

use nalgebra::{DMatrix, DVector};

use crate::fock::{AtomFieldState, AtomLevel, FieldDensityOperator, Mode, QuasiMode, TwoModeState, EVOLVED_NORM_TOL};
use crate::quasimode::BasisTransform;
use crate::{Error, Result, C64};

/// Probability below which an atom detection outcome is treated as impossible.
pub const MIN_OUTCOME_PROBABILITY: f64 = 1e-14;

/// Atom-basis block of `U`: `Ge` is `<g|U|e>` and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Ee,
    Ge,
    Eg,
    Gg,
}

fn check_tau(tau: f64) -> Result<()> {
    if !tau.is_finite() {
        return Err(Error::NonFinite("interaction time"));
    }
    Ok(())
}

fn minus_i_sin(x: f64) -> C64 {
    C64::new(0.0, -x.sin())
}

/// Applies one branch of `U(tau)` to a quasi-mode state. The result keeps the
/// input cutoff and is generally not normalized.
pub fn apply_branch_quasimode(
    branch: Branch,
    state: &TwoModeState<QuasiMode>,
    tau: f64,
) -> Result<TwoModeState<QuasiMode>> {
    check_tau(tau)?;
    let cutoff = state.cutoff();
    let mut out = TwoModeState::zeros(cutoff);
    match branch {
        Branch::Ee | Branch::Gg => {
            let shift = if branch == Branch::Ee { 1.0 } else { 0.0 };
            for n in 0..=cutoff {
                let src = state.block(n);
                for (k, dst) in out.block_mut(n).iter_mut().enumerate() {
                    let n_a1 = (n as usize - k) as f64;
                    *dst = src[k] * (tau * (n_a1 + shift).sqrt()).cos();
                }
            }
        }
        Branch::Ge => {
            if state.block(cutoff).iter().any(|a| *a != C64::new(0.0, 0.0)) {
                return Err(Error::InsufficientHeadroom {
                    occupied: cutoff,
                    cutoff,
                });
            }
            for n in 0..cutoff {
                let src = state.block(n).to_vec();
                let dst = out.block_mut(n + 1);
                for (k, a) in src.iter().enumerate() {
                    let n_a1 = (n as usize - k) as f64;
                    dst[k] = a * minus_i_sin(tau * (n_a1 + 1.0).sqrt());
                }
            }
        }
        Branch::Eg => {
            for n in 1..=cutoff {
                let src = state.block(n).to_vec();
                let dst = out.block_mut(n - 1);
                for (k, d) in dst.iter_mut().enumerate() {
                    let n_a1 = (n as usize - k) as f64;
                    *d = src[k] * minus_i_sin(tau * n_a1.sqrt());
                }
            }
        }
    }
    Ok(out)
}

/// Mode-basis matrices of the four branches restricted to one photon-number
/// block `2j`:
///
/// - `c`: `U_ee`, `(2j+1) x (2j+1)`
/// - `s`: `U_ge`, `(2j+2) x (2j+1)`, into the `2j+1` block
/// - `s_bar`: `U_eg`, `(2j) x (2j+1)`, into the `2j-1` block
/// - `c_bar`: `U_gg`, `(2j+1) x (2j+1)`
///
/// Rows and columns are ordered by `m` descending.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchMatrices {
    pub twice_j: u32,
    pub tau: f64,
    pub c: DMatrix<C64>,
    pub s: DMatrix<C64>,
    pub s_bar: DMatrix<C64>,
    pub c_bar: DMatrix<C64>,
}

impl BranchMatrices {
    pub fn get(&self, branch: Branch) -> &DMatrix<C64> {
        match branch {
            Branch::Ee => &self.c,
            Branch::Ge => &self.s,
            Branch::Eg => &self.s_bar,
            Branch::Gg => &self.c_bar,
        }
    }
}

/// Sums over the quasi-mode index `nu` of products of Wigner blocks weighted
/// by the one-mode JC amplitudes.
pub fn branch_matrices(twice_j: u32, tau: f64, transform: &BasisTransform) -> Result<BranchMatrices> {
    check_tau(tau)?;
    let n = twice_j as usize + 1;
    let d = transform.block(twice_j)?;
    let d_adj = d.adjoint();
    let up = transform.block(twice_j + 1)?;

    let mut c = DMatrix::zeros(n, n);
    let mut c_bar = DMatrix::zeros(n, n);
    let mut s = DMatrix::zeros(n + 1, n);
    let mut s_bar = DMatrix::zeros(n - 1, n);

    // index k <-> nu = j - k, so j + nu = 2j - k
    for k in 0..n {
        let j_plus_nu = (twice_j as usize - k) as f64;
        let row = d_adj.row(k);
        c += d.column(k) * row * C64::new((tau * (j_plus_nu + 1.0).sqrt()).cos(), 0.0);
        c_bar += d.column(k) * row * C64::new((tau * j_plus_nu.sqrt()).cos(), 0.0);
        s += up.column(k) * row * minus_i_sin(tau * (j_plus_nu + 1.0).sqrt());
    }
    if twice_j > 0 {
        let down = transform.block(twice_j - 1)?;
        // nu = -j (k = 2j) has sin(0) = 0 and no partner in the lower block
        for k in 0..n - 1 {
            let j_plus_nu = (twice_j as usize - k) as f64;
            s_bar += down.column(k) * d_adj.row(k) * minus_i_sin(tau * j_plus_nu.sqrt());
        }
    }
    Ok(BranchMatrices {
        twice_j,
        tau,
        c,
        s,
        s_bar,
        c_bar,
    })
}

/// Applies one branch of `U(tau)` directly in the mode basis using
/// [`branch_matrices`] block by block.
pub fn apply_branch_mode(
    branch: Branch,
    state: &TwoModeState<Mode>,
    tau: f64,
    transform: &BasisTransform,
) -> Result<TwoModeState<Mode>> {
    let cutoff = state.cutoff();
    if branch == Branch::Ge && state.block(cutoff).iter().any(|a| *a != C64::new(0.0, 0.0)) {
        return Err(Error::InsufficientHeadroom {
            occupied: cutoff,
            cutoff,
        });
    }
    let mut out = TwoModeState::zeros(cutoff);
    for n in 0..=cutoff {
        let src = state.block(n);
        if src.iter().all(|a| *a == C64::new(0.0, 0.0)) {
            continue;
        }
        let target = match branch {
            Branch::Ee | Branch::Gg => n,
            Branch::Ge => n + 1,
            Branch::Eg if n == 0 => continue,
            Branch::Eg => n - 1,
        };
        let m = branch_matrices(n, tau, transform)?;
        let w = m.get(branch) * DVector::from_column_slice(src);
        for (dst, v) in out.block_mut(target).iter_mut().zip(w.iter()) {
            *dst += v;
        }
    }
    Ok(out)
}

fn check_evolvable(state: &AtomFieldState, tau: f64, transform: &BasisTransform) -> Result<()> {
    check_tau(tau)?;
    let cutoff = state.cutoff();
    if cutoff > transform.cutoff() {
        return Err(Error::TransformTooSmall {
            available: transform.cutoff(),
            needed: cutoff,
        });
    }
    if let Some(top) = state.excited().max_occupied_total() {
        if top >= cutoff {
            return Err(Error::InsufficientHeadroom {
                occupied: top,
                cutoff,
            });
        }
    }
    Ok(())
}

/// Evolves a joint state by `U(tau)` through the quasi-mode basis.
///
/// The excited-atom part must leave one photon of headroom below the cutoff,
/// since `U_ge` adds a quasi-photon.
pub fn evolve(state: &AtomFieldState, tau: f64, transform: &BasisTransform) -> Result<AtomFieldState> {
    check_evolvable(state, tau, transform)?;
    let qe = transform.to_quasimode_basis(state.excited())?;
    let qg = transform.to_quasimode_basis(state.ground())?;
    let new_e = apply_branch_quasimode(Branch::Ee, &qe, tau)?.add(&apply_branch_quasimode(Branch::Eg, &qg, tau)?)?;
    let new_g = apply_branch_quasimode(Branch::Ge, &qe, tau)?.add(&apply_branch_quasimode(Branch::Gg, &qg, tau)?)?;
    AtomFieldState::new(transform.to_mode_basis(&new_e)?, transform.to_mode_basis(&new_g)?)
}

/// Same as [`evolve`] but through the mode-basis coefficient matrices.
pub fn evolve_with_coefficients(
    state: &AtomFieldState,
    tau: f64,
    transform: &BasisTransform,
) -> Result<AtomFieldState> {
    check_evolvable(state, tau, transform)?;
    let (e, g) = (state.excited(), state.ground());
    let new_e = apply_branch_mode(Branch::Ee, e, tau, transform)?.add(&apply_branch_mode(Branch::Eg, g, tau, transform)?)?;
    let new_g = apply_branch_mode(Branch::Ge, e, tau, transform)?.add(&apply_branch_mode(Branch::Gg, g, tau, transform)?)?;
    AtomFieldState::new(new_e, new_g)
}

/// Partial trace over the atom: `|excited><excited| + |ground><ground|`.
pub fn reduced_field_density(state: &AtomFieldState) -> FieldDensityOperator<Mode> {
    FieldDensityOperator::from_ensemble(state.cutoff(), [state.excited(), state.ground()])
        .expect("parts share a cutoff")
}

/// Multiplies by a global phase so that the largest-magnitude amplitude
/// (first in storage order among near-ties) is real and positive.
pub fn fix_global_phase<B: crate::fock::Basis>(state: &TwoModeState<B>) -> TwoModeState<B> {
    let max = state.amplitudes().iter().map(|a| a.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return state.clone();
    }
    let pivot = state
        .amplitudes()
        .iter()
        .find(|a| a.norm() >= max * (1.0 - 1e-9))
        .copied()
        .expect("max is attained");
    state.scaled(pivot.conj() / pivot.norm())
}

/// Projects onto the detected atomic level. Returns the renormalized,
/// phase-fixed field state and the detection probability.
pub fn atom_detection_collapse(
    state: &AtomFieldState,
    outcome: AtomLevel,
) -> Result<(TwoModeState<Mode>, f64)> {
    let total = state.norm_sqr();
    if (total - 1.0).abs() > EVOLVED_NORM_TOL {
        return Err(Error::NotNormalized { norm_sqr: total });
    }
    let part = state.part(outcome);
    let probability = part.norm_sqr();
    if probability < MIN_OUTCOME_PROBABILITY {
        return Err(Error::ImpossibleOutcome { probability });
    }
    Ok((fix_global_phase(&part.normalized()?), probability))
}
