//! Mode <-> quasi-mode Fock basis transform.
//!
//! `||j,m>> = sum_{m'} D^{(j)}_{m'm} |j,m'>`, hence mode amplitudes are
//! `D q` and quasi-mode amplitudes are `D^dagger b`, block by block in the
//! total photon number `2j`. Blocks never mix different photon numbers.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use crate::fock::{block_offset, dimension, Basis, FieldDensityOperator, Mode, QuasiMode, TwoModeState};
use crate::wigner::{d_block, CouplingConfig};
use crate::{Error, Result, C64};

/// The Wigner blocks `D^{(j)}` for `2j = 0..=cutoff`, materialized once per
/// coupling configuration.
#[derive(Debug, Clone)]
pub struct BasisTransform {
    cutoff: u32,
    couplings: CouplingConfig,
    blocks: Vec<DMatrix<C64>>,
}

pub fn build_transform(couplings: &CouplingConfig, cutoff: u32) -> Result<BasisTransform> {
    BasisTransform::build(couplings, cutoff)
}

impl BasisTransform {
    pub fn build(couplings: &CouplingConfig, cutoff: u32) -> Result<Self> {
        let euler = couplings.euler();
        let blocks = (0..=cutoff)
            .map(|n| d_block(n, &euler))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cutoff,
            couplings: *couplings,
            blocks,
        })
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn couplings(&self) -> &CouplingConfig {
        &self.couplings
    }

    /// `D^{(j)}` for `2j = total`; blocks past the cutoff are computed on
    /// demand.
    pub fn block(&self, total: u32) -> Result<Cow<'_, DMatrix<C64>>> {
        match self.blocks.get(total as usize) {
            Some(b) => Ok(Cow::Borrowed(b)),
            None => Ok(Cow::Owned(d_block(total, &self.couplings.euler())?)),
        }
    }

    pub(crate) fn stored_block(&self, total: u32) -> &DMatrix<C64> {
        &self.blocks[total as usize]
    }

    fn covers(&self, cutoff: u32) -> Result<()> {
        if cutoff > self.cutoff {
            return Err(Error::TransformTooSmall {
                available: self.cutoff,
                needed: cutoff,
            });
        }
        Ok(())
    }

    pub fn to_mode_basis(&self, state: &TwoModeState<QuasiMode>) -> Result<TwoModeState<Mode>> {
        self.covers(state.cutoff())?;
        Ok(apply_blocks(state, |n| self.stored_block(n).clone()))
    }

    pub fn to_quasimode_basis(&self, state: &TwoModeState<Mode>) -> Result<TwoModeState<QuasiMode>> {
        self.covers(state.cutoff())?;
        Ok(apply_blocks(state, |n| self.stored_block(n).adjoint()))
    }

    /// `rho -> T rho T^dagger` with `T` block-diagonal in `D^{(j)}`.
    pub fn density_to_mode_basis(
        &self,
        rho: &FieldDensityOperator<QuasiMode>,
    ) -> Result<FieldDensityOperator<Mode>> {
        self.covers(rho.cutoff())?;
        let t = self.full_matrix(rho.cutoff());
        FieldDensityOperator::from_matrix(rho.cutoff(), &t * rho.matrix() * t.adjoint())
    }

    /// `rho -> T^dagger rho T`.
    pub fn density_to_quasimode_basis(
        &self,
        rho: &FieldDensityOperator<Mode>,
    ) -> Result<FieldDensityOperator<QuasiMode>> {
        self.covers(rho.cutoff())?;
        let t = self.full_matrix(rho.cutoff());
        FieldDensityOperator::from_matrix(rho.cutoff(), t.adjoint() * rho.matrix() * &t)
    }

    /// Block-diagonal matrix mapping quasi-mode amplitudes to mode amplitudes
    /// on the space with the given cutoff.
    pub fn full_matrix(&self, cutoff: u32) -> DMatrix<C64> {
        let d = dimension(cutoff);
        let mut t = DMatrix::zeros(d, d);
        for n in 0..=cutoff.min(self.cutoff) {
            let off = block_offset(n);
            let size = n as usize + 1;
            t.view_mut((off, off), (size, size)).copy_from(self.stored_block(n));
        }
        t
    }
}

fn apply_blocks<A: Basis, B: Basis>(
    state: &TwoModeState<A>,
    block: impl Fn(u32) -> DMatrix<C64>,
) -> TwoModeState<B> {
    let mut out = TwoModeState::<B>::zeros(state.cutoff());
    for n in 0..=state.cutoff() {
        let v = DVector::from_column_slice(state.block(n));
        let w = block(n) * v;
        out.block_mut(n).copy_from_slice(w.as_slice());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{labels, make_basis_state, ModeFockLabel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn random_state<B: Basis>(rng: &mut ChaCha8Rng, cutoff: u32) -> TwoModeState<B> {
        let amps = (0..dimension(cutoff))
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        TwoModeState::from_amplitudes(cutoff, amps)
            .unwrap()
            .normalized()
            .unwrap()
    }

    fn random_couplings(rng: &mut ChaCha8Rng) -> CouplingConfig {
        CouplingConfig::from_polar(
            rng.random_range(0.05..2.0),
            rng.random_range(-PI..PI),
            rng.random_range(0.05..2.0),
            rng.random_range(-PI..PI),
        )
        .unwrap()
    }

    #[test]
    fn single_mode_coupling_gives_phases_only() {
        let c = CouplingConfig::from_polar(1.3, 0.4, 0.0, 0.0).unwrap();
        let t = build_transform(&c, 5).unwrap();
        for n in 0..=5 {
            let b = t.block(n).unwrap();
            for r in 0..b.nrows() {
                for k in 0..b.ncols() {
                    if r == k {
                        assert!((b[(r, k)].norm() - 1.0).abs() < 1e-14);
                    } else {
                        assert!(b[(r, k)].norm() < 1e-14);
                    }
                }
            }
        }
        for l in labels(5) {
            let s = TwoModeState::<QuasiMode>::basis_state(l, 5).unwrap();
            let m = t.to_mode_basis(&s).unwrap();
            assert!((m.amplitude(l).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn equal_couplings_half_block() {
        let t = build_transform(&CouplingConfig::equal_real(), 1).unwrap();
        let b = t.block(1).unwrap();
        let expected = [[FRAC_1_SQRT_2, -FRAC_1_SQRT_2], [FRAC_1_SQRT_2, FRAC_1_SQRT_2]];
        for r in 0..2 {
            for k in 0..2 {
                assert!((b[(r, k)] - expected[r][k]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_cutoff_is_trivial() {
        let t = build_transform(&CouplingConfig::equal_real(), 0).unwrap();
        assert_eq!(t.block(0).unwrap().as_ref(), &DMatrix::from_element(1, 1, C64::new(1.0, 0.0)));
        let v = TwoModeState::<QuasiMode>::vacuum(0);
        assert_eq!(t.to_mode_basis(&v).unwrap(), TwoModeState::<Mode>::vacuum(0));
        assert_eq!(t.to_quasimode_basis(&TwoModeState::vacuum(0)).unwrap(), v);
    }

    #[test]
    fn quasimode_one_photon_state() {
        let t = build_transform(&CouplingConfig::equal_real(), 2).unwrap();
        let q = TwoModeState::<QuasiMode>::basis_state(ModeFockLabel::new(1, 0), 2).unwrap();
        let m = t.to_mode_basis(&q).unwrap();
        assert!((m.amplitude(ModeFockLabel::new(1, 0)) - FRAC_1_SQRT_2).norm() < 1e-15);
        assert!((m.amplitude(ModeFockLabel::new(0, 1)) - FRAC_1_SQRT_2).norm() < 1e-15);
        assert!((m.norm_sqr() - 1.0).abs() < 1e-15);

        let back = t
            .to_quasimode_basis(&make_basis_state(ModeFockLabel::new(1, 0), 2).unwrap())
            .unwrap();
        assert!((back.amplitude(ModeFockLabel::new(1, 0)).norm() - FRAC_1_SQRT_2).abs() < 1e-15);

        let vac = t.to_mode_basis(&TwoModeState::vacuum(2)).unwrap();
        assert_eq!(vac, TwoModeState::vacuum(2));
    }

    #[test]
    fn transform_too_small_is_rejected() {
        let t = build_transform(&CouplingConfig::equal_real(), 2).unwrap();
        assert_eq!(
            t.to_quasimode_basis(&TwoModeState::vacuum(3)),
            Err(Error::TransformTooSmall { available: 2, needed: 3 })
        );
        assert!(t.block(3).is_ok());
    }

    #[test]
    fn roundtrip_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let c = random_couplings(&mut rng);
            let cutoff = rng.random_range(0..8);
            let t = build_transform(&c, cutoff).unwrap();
            let psi: TwoModeState<Mode> = random_state(&mut rng, cutoff);
            let q = t.to_quasimode_basis(&psi).unwrap();
            assert!((q.norm_sqr() - 1.0).abs() < 1e-12);
            for n in 0..=cutoff {
                assert!((q.block_norm_sqr(n) - psi.block_norm_sqr(n)).abs() < 1e-12);
            }
            let back = t.to_mode_basis(&q).unwrap();
            for (a, b) in back.amplitudes().iter().zip(psi.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn density_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = random_couplings(&mut rng);
        let t = build_transform(&c, 4).unwrap();

        // identity on the 2j = 3 block
        let mut m = DMatrix::zeros(dimension(4), dimension(4));
        for k in 0..4 {
            m[(block_offset(3) + k, block_offset(3) + k)] = C64::new(0.25, 0.0);
        }
        let rho = FieldDensityOperator::<Mode>::from_matrix(4, m.clone()).unwrap();
        let q = t.density_to_quasimode_basis(&rho).unwrap();
        assert!((q.matrix() - &m).camax() < 1e-14);

        // pure state consistency
        let chi: TwoModeState<QuasiMode> = random_state(&mut rng, 4);
        let rho_q = FieldDensityOperator::from_pure(&chi);
        let rho_m = t.density_to_mode_basis(&rho_q).unwrap();
        let expected = FieldDensityOperator::from_pure(&t.to_mode_basis(&chi).unwrap());
        assert!((rho_m.matrix() - expected.matrix()).camax() < 1e-12);

        // trace and spectrum
        let members: Vec<TwoModeState<Mode>> = (0..4)
            .map(|_| random_state::<Mode>(&mut rng, 4).scaled(C64::new(0.5, 0.0)))
            .collect();
        let rho = FieldDensityOperator::from_ensemble(4, &members).unwrap();
        let q = t.density_to_quasimode_basis(&rho).unwrap();
        assert!((q.trace() - rho.trace()).norm() < 1e-12);
        for (a, b) in q.eigenvalues().iter().zip(rho.eigenvalues()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
