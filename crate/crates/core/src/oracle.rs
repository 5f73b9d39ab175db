//! Brute-force reference dynamics in the original mode basis.
//!
//! The interaction Hamiltonian `sigma+ (gamma1 a1 + gamma2 a2) + h.c.` (units
//! of `hbar g`) is built on the truncated space `n1 + n2 <= cutoff` for each
//! atomic level, diagonalized once, and exponentiated through its
//! eigendecomposition. Nothing here uses the quasi-mode transform.
//!
//! Joint vectors are ordered like [`AtomFieldState::to_vec`]: all excited
//! amplitudes first, then all ground amplitudes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::evolution::evolve;
use crate::fock::{dimension, labels, phase_aligned_max_deviation, AtomFieldState, AtomLevel, ModeFockLabel};
use crate::quasimode::BasisTransform;
use crate::wigner::CouplingConfig;
use crate::{Error, Result, C64};

/// Deviation above which the algebraic and brute-force evolutions are
/// considered to disagree.
pub const CROSSCHECK_TOL: f64 = 1e-9;

/// Largest total photon number used for batch draws.
pub const MAX_DRAW_PHOTONS: u32 = 4;

#[derive(Debug, Clone)]
pub struct TruncatedHamiltonian {
    cutoff: u32,
    couplings: CouplingConfig,
    omega_over_g: Option<f64>,
    matrix: DMatrix<C64>,
    eigen: SymmetricEigen<C64, nalgebra::Dyn>,
}

fn joint_index(level: AtomLevel, label: ModeFockLabel, cutoff: u32) -> usize {
    match level {
        AtomLevel::Excited => label.index(),
        AtomLevel::Ground => dimension(cutoff) + label.index(),
    }
}

/// Interaction Hamiltonian on `n1 + n2 <= cutoff`.
pub fn build_hamiltonian(couplings: &CouplingConfig, cutoff: u32) -> Result<TruncatedHamiltonian> {
    TruncatedHamiltonian::build(couplings, cutoff, None)
}

impl TruncatedHamiltonian {
    /// `omega_over_g` adds the free term `omega (n1 + n2 + |e><e|)`, which
    /// is constant on each excitation sector.
    pub fn build(couplings: &CouplingConfig, cutoff: u32, omega_over_g: Option<f64>) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidArgument("Hamiltonian cutoff must be at least 1".into()));
        }
        if omega_over_g.is_some_and(|w| !w.is_finite()) {
            return Err(Error::NonFinite("free-term frequency"));
        }
        let dim = 2 * dimension(cutoff);
        let mut h = DMatrix::zeros(dim, dim);
        let gammas = [couplings.gamma1(), couplings.gamma2()];
        for label in labels(cutoff) {
            let e = joint_index(AtomLevel::Excited, label, cutoff);
            // sigma- a_i^dagger |e; n> = sqrt(n_i + 1) |g; n + 1_i>
            let raised = [
                ModeFockLabel::new(label.n1 + 1, label.n2),
                ModeFockLabel::new(label.n1, label.n2 + 1),
            ];
            let occupations = [label.n1, label.n2];
            for ((gamma, up), n) in gammas.iter().zip(raised).zip(occupations) {
                if up.total() > cutoff {
                    continue;
                }
                let g = joint_index(AtomLevel::Ground, up, cutoff);
                let amp = gamma.conj() * ((n + 1) as f64).sqrt();
                h[(g, e)] += amp;
                h[(e, g)] += amp.conj();
            }
            if let Some(w) = omega_over_g {
                let g = joint_index(AtomLevel::Ground, label, cutoff);
                h[(e, e)] += C64::new(w * (label.total() + 1) as f64, 0.0);
                h[(g, g)] += C64::new(w * label.total() as f64, 0.0);
            }
        }
        let eigen = h.clone().symmetric_eigen();
        Ok(Self {
            cutoff,
            couplings: *couplings,
            omega_over_g,
            matrix: h,
            eigen,
        })
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn couplings(&self) -> &CouplingConfig {
        &self.couplings
    }

    pub fn omega_over_g(&self) -> Option<f64> {
        self.omega_over_g
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn element(&self, row: (AtomLevel, ModeFockLabel), col: (AtomLevel, ModeFockLabel)) -> C64 {
        self.matrix[(
            joint_index(row.0, row.1, self.cutoff),
            joint_index(col.0, col.1, self.cutoff),
        )]
    }

    /// `exp(-i H tau)` as a dense matrix.
    pub fn propagator(&self, tau: f64) -> Result<DMatrix<C64>> {
        check_tau(tau)?;
        let v = &self.eigen.eigenvectors;
        let phases = DVector::from_iterator(
            v.ncols(),
            self.eigen.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * tau)),
        );
        Ok(v * DMatrix::from_diagonal(&phases) * v.adjoint())
    }

    /// `<psi|H|psi>`.
    pub fn expectation(&self, state: &AtomFieldState) -> Result<f64> {
        let v = DVector::from_vec(self.embed(state)?.to_vec());
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)].re)
    }

    fn embed(&self, state: &AtomFieldState) -> Result<AtomFieldState> {
        state.with_cutoff(self.cutoff)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !tau.is_finite() {
        return Err(Error::NonFinite("interaction time"));
    }
    Ok(())
}

/// `psi -> exp(-i H tau) psi` with the state embedded at the Hamiltonian's
/// cutoff. Exact only for states at least one photon (two for margin) below
/// the cutoff; support at the cutoff sees a truncated coupling.
pub fn evolve_exact(state: &AtomFieldState, tau: f64, h: &TruncatedHamiltonian) -> Result<AtomFieldState> {
    check_tau(tau)?;
    let psi = DVector::from_vec(h.embed(state)?.to_vec());
    let v = &h.eigen.eigenvectors;
    let mut coeffs = v.adjoint() * psi;
    for (c, &l) in coeffs.iter_mut().zip(h.eigen.eigenvalues.iter()) {
        *c *= C64::from_polar(1.0, -l * tau);
    }
    AtomFieldState::from_vec(h.cutoff, (v * coeffs).as_slice())
}

fn crosscheck_with(state: &AtomFieldState, tau: f64, h: &TruncatedHamiltonian) -> Result<f64> {
    let exact = evolve_exact(state, tau, h)?;
    let needed = state.excited().max_occupied_total().map_or(0, |n| n + 1);
    let cutoff = h.cutoff().max(needed);
    let transform = BasisTransform::build(h.couplings(), cutoff)?;
    let algebraic = evolve(&state.with_cutoff(cutoff)?, tau, &transform)?;
    let exact = exact.with_cutoff(cutoff)?;
    Ok(phase_aligned_max_deviation(&algebraic.to_vec(), &exact.to_vec()))
}

/// Maximum amplitude difference between [`evolve`] and [`evolve_exact`]
/// after global phase alignment. The algebraic side runs at whatever cutoff
/// the state needs, so support at the brute-force cutoff shows up as a
/// truncation error.
pub fn crosscheck(state: &AtomFieldState, tau: f64, couplings: &CouplingConfig, cutoff: u32) -> Result<f64> {
    crosscheck_with(state, tau, &build_hamiltonian(couplings, cutoff)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawKind {
    ExcitedVacuum,
    ExcitedFock,
    GroundFock,
    Superposition,
}

/// One randomized crosscheck input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Draw {
    pub index: usize,
    pub kind: DrawKind,
    pub g1_mag: f64,
    pub g1_phase: f64,
    pub g2_mag: f64,
    pub g2_phase: f64,
    pub tau: f64,
    /// Fock label for the basis-state kinds, e.g. `e;1,2`.
    pub initial: Option<String>,
    #[serde(skip)]
    pub state: AtomFieldState,
}

impl Draw {
    pub fn couplings(&self) -> Result<CouplingConfig> {
        CouplingConfig::from_polar(self.g1_mag, self.g1_phase, self.g2_mag, self.g2_phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub draws: usize,
    pub cutoff: u32,
    pub seed: u64,
    pub max_deviation: f64,
    pub worst: Draw,
}

impl BatchReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= CROSSCHECK_TOL
    }
}

/// Seeded draws cycling through `|e;0,0>`, `|e;n1,n2>`, `|g;n1,n2>` and
/// random superpositions, with `n1 + n2 <= min(4, cutoff)`, coupling
/// magnitudes in `[0.05, 2)`, random phases and `tau` in `[0, 2 pi)`.
pub fn generate_draws(draws: usize, seed: u64, cutoff: u32) -> Result<Vec<Draw>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_n = MAX_DRAW_PHOTONS.min(cutoff);
    let kinds = [
        DrawKind::ExcitedVacuum,
        DrawKind::ExcitedFock,
        DrawKind::GroundFock,
        DrawKind::Superposition,
    ];
    let pi = std::f64::consts::PI;
    (0..draws)
        .map(|index| {
            let kind = kinds[index % kinds.len()];
            let g1_mag = rng.random_range(0.05..2.0);
            let g1_phase = rng.random_range(-pi..pi);
            let g2_mag = rng.random_range(0.05..2.0);
            let g2_phase = rng.random_range(-pi..pi);
            let tau = rng.random_range(0.0..2.0 * pi);
            let random_label = |rng: &mut ChaCha8Rng| {
                let n = rng.random_range(0..=max_n);
                let n2 = rng.random_range(0..=n);
                ModeFockLabel::new(n - n2, n2)
            };
            let (state, initial) = match kind {
                DrawKind::ExcitedVacuum | DrawKind::ExcitedFock | DrawKind::GroundFock => {
                    let (level, label) = match kind {
                        DrawKind::ExcitedVacuum => (AtomLevel::Excited, ModeFockLabel::new(0, 0)),
                        DrawKind::ExcitedFock => (AtomLevel::Excited, random_label(&mut rng)),
                        _ => (AtomLevel::Ground, random_label(&mut rng)),
                    };
                    (
                        AtomFieldState::basis_state(level, label, max_n)?,
                        Some(format!("{level};{},{}", label.n1, label.n2)),
                    )
                }
                DrawKind::Superposition => {
                    let amps: Vec<C64> = (0..2 * dimension(max_n))
                        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect();
                    (AtomFieldState::from_vec(max_n, &amps)?.normalized()?, None)
                }
            };
            Ok(Draw {
                index,
                kind,
                g1_mag,
                g1_phase,
                g2_mag,
                g2_phase,
                tau,
                initial,
                state,
            })
        })
        .collect()
}

/// Runs [`crosscheck`] over seeded draws in parallel and reports the worst.
pub fn crosscheck_batch(draws: usize, seed: u64, cutoff: u32) -> Result<BatchReport> {
    if draws == 0 {
        return Err(Error::InvalidArgument("at least one draw is required".into()));
    }
    let inputs = generate_draws(draws, seed, cutoff)?;
    let deviations = inputs
        .par_iter()
        .map(|d| crosscheck(&d.state, d.tau, &d.couplings()?, cutoff))
        .collect::<Result<Vec<f64>>>()?;
    let (worst, max_deviation) = deviations
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, d)| if d > best.1 { (i, d) } else { best });
    Ok(BatchReport {
        draws,
        cutoff,
        seed,
        max_deviation,
        worst: inputs[worst].clone(),
    })
}
