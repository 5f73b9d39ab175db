//! Wigner rotation matrices of SU(2) and the Euler angles fixed by the
//! atom-field coupling constants.
//!
//! Convention: `D^{(j)}_{m'm}(phi, theta, chi) = exp(-i(m' phi + m chi)) d^{(j)}_{m'm}(theta)`
//! with the z-y-z small-d matrix
//!
//! ```text
//! d^{(j)}_{m'm}(theta) = sum_s (-1)^{m'-m+s} sqrt((j+m')!(j-m')!(j+m)!(j-m)!)
//!                        / ((j+m-s)! s! (m'-m+s)! (j-m'-s)!)
//!                        * cos(theta/2)^{2j+m-m'-2s} sin(theta/2)^{m'-m+2s}
//! ```
//!
//! so that `d^{(1/2)}(theta) = [[cos(theta/2), -sin(theta/2)], [sin(theta/2), cos(theta/2)]]`
//! (rows and columns ordered `m = +1/2, -1/2`). This is the convention in
//! which column `m` of `D^{(j)}` holds the mode-basis amplitudes of the
//! quasi-mode state `||j,m>>`; [`dmatrix_by_expansion`] computes that column
//! directly from the creation-operator polynomial and is the reference the
//! closed form is tested against.
//!
//! Half-integers are passed as doubled integers (`twice_j`, `twice_m`), and
//! matrix rows/columns are ordered by `m` descending: index `k` holds
//! `m = j - k`.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::fock::SchwingerLabel;
use crate::{Error, Result, C64};

/// Largest supported `2j`.
pub const MAX_TWICE_J: u32 = 128;

/// Beyond this `2j` factorial ratios go through logarithms.
const PLAIN_FACTORIAL_LIMIT: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub phi: f64,
    pub theta: f64,
    pub chi: f64,
}

impl EulerAngles {
    pub fn new(phi: f64, theta: f64, chi: f64) -> Result<Self> {
        if !(phi.is_finite() && theta.is_finite() && chi.is_finite()) {
            return Err(Error::NonFinite("Euler angle"));
        }
        Ok(Self { phi, theta, chi })
    }
}

/// Complex couplings `g1`, `g2` of the two modes and the quantities derived
/// from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConfig {
    g1: C64,
    g2: C64,
    g: f64,
    gamma1: C64,
    gamma2: C64,
    euler: EulerAngles,
}

impl CouplingConfig {
    pub fn new(g1: C64, g2: C64) -> Result<Self> {
        euler_from_couplings(g1, g2)
    }

    /// Couplings given as magnitude and phase (radians).
    pub fn from_polar(mag1: f64, phase1: f64, mag2: f64, phase2: f64) -> Result<Self> {
        Self::new(C64::from_polar(mag1, phase1), C64::from_polar(mag2, phase2))
    }

    /// `g1 = g2 = 1`.
    pub fn equal_real() -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0)).expect("nonzero couplings")
    }

    pub fn g1(&self) -> C64 {
        self.g1
    }

    pub fn g2(&self) -> C64 {
        self.g2
    }

    /// `sqrt(|g1|^2 + |g2|^2)`; the unit of the dimensionless time `tau = g t`.
    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn gamma1(&self) -> C64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> C64 {
        self.gamma2
    }

    pub fn euler(&self) -> EulerAngles {
        self.euler
    }
}

/// Derives `gamma_i = g_i / g` and the Euler angles `phi = phi1 - phi2`,
/// `chi = phi1 + phi2`, `cos(theta/2) = |gamma1|`, `sin(theta/2) = |gamma2|`.
///
/// A vanishing coupling has no phase; it is taken as zero, which leaves `D`
/// unchanged because the corresponding `d` entries vanish.
pub fn euler_from_couplings(g1: C64, g2: C64) -> Result<CouplingConfig> {
    if !(g1.re.is_finite() && g1.im.is_finite() && g2.re.is_finite() && g2.im.is_finite()) {
        return Err(Error::NonFinite("coupling constant"));
    }
    let g = g1.norm().hypot(g2.norm());
    if g == 0.0 {
        return Err(Error::ZeroCouplings);
    }
    let gamma1 = g1 / g;
    let gamma2 = g2 / g;
    let phase = |z: C64| if z.norm() == 0.0 { 0.0 } else { z.arg() };
    let (phi1, phi2) = (phase(gamma1), phase(gamma2));
    let theta = 2.0 * gamma2.norm().atan2(gamma1.norm());
    Ok(CouplingConfig {
        g1,
        g2,
        g,
        gamma1,
        gamma2,
        euler: EulerAngles {
            phi: phi1 - phi2,
            theta,
            chi: phi1 + phi2,
        },
    })
}

fn factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![1.0f64; PLAIN_FACTORIAL_LIMIT as usize + 1];
        for n in 1..t.len() {
            t[n] = t[n - 1] * n as f64;
        }
        t
    })
}

fn ln_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0f64; MAX_TWICE_J as usize + 1];
        for n in 1..t.len() {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

fn check_labels(twice_j: u32, twice_m_row: i32, twice_m_col: i32) -> Result<()> {
    if twice_j > MAX_TWICE_J {
        return Err(Error::InvalidArgument(format!(
            "2j = {twice_j} exceeds supported maximum {MAX_TWICE_J}"
        )));
    }
    SchwingerLabel::new(twice_j, twice_m_row)?;
    SchwingerLabel::new(twice_j, twice_m_col)?;
    Ok(())
}

/// Wigner small-d element `d^{(j)}_{m_row, m_col}(theta)`.
///
/// The factorial sum alternates in sign; accuracy is near machine precision
/// for `j <= 10` and degrades to roughly `1e-7` at `j = 32`.
pub fn small_d(twice_j: u32, twice_m_row: i32, twice_m_col: i32, theta: f64) -> Result<f64> {
    check_labels(twice_j, twice_m_row, twice_m_col)?;
    Ok(small_d_unchecked(twice_j, twice_m_row, twice_m_col, theta))
}

fn small_d_unchecked(twice_j: u32, twice_m_row: i32, twice_m_col: i32, theta: f64) -> f64 {
    let tj = twice_j as i64;
    let (tr, tc) = (twice_m_row as i64, twice_m_col as i64);
    let j_plus_m = ((tj + tc) / 2) as usize;
    let j_minus_m = ((tj - tc) / 2) as usize;
    let j_plus_mr = ((tj + tr) / 2) as usize;
    let j_minus_mr = ((tj - tr) / 2) as usize;
    let dm = (tr - tc) / 2;

    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let s_min = (-dm).max(0) as usize;
    let s_max = j_plus_m.min(j_minus_mr);

    let plain = twice_j <= PLAIN_FACTORIAL_LIMIT;
    let (f, lf) = (factorials(), ln_factorials());
    let numerator = if plain {
        (f[j_plus_mr] * f[j_minus_mr] * f[j_plus_m] * f[j_minus_m]).sqrt()
    } else {
        0.5 * (lf[j_plus_mr] + lf[j_minus_mr] + lf[j_plus_m] + lf[j_minus_m])
    };

    let mut sum = 0.0;
    for k in s_min..=s_max {
        let dm_k = (dm + k as i64) as usize;
        let ratio = if plain {
            numerator / (f[j_plus_m - k] * f[k] * f[dm_k] * f[j_minus_mr - k])
        } else {
            (numerator - lf[j_plus_m - k] - lf[k] - lf[dm_k] - lf[j_minus_mr - k]).exp()
        };
        let sign = if dm_k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let cos_pow = (tj - dm - 2 * k as i64) as i32;
        let sin_pow = (dm + 2 * k as i64) as i32;
        sum += sign * ratio * c.powi(cos_pow) * s.powi(sin_pow);
    }
    sum
}

/// Wigner D-matrix element `exp(-i(m_row phi + m_col chi)) d^{(j)}_{m_row, m_col}(theta)`.
pub fn big_d(twice_j: u32, twice_m_row: i32, twice_m_col: i32, euler: &EulerAngles) -> Result<C64> {
    check_labels(twice_j, twice_m_row, twice_m_col)?;
    Ok(big_d_unchecked(twice_j, twice_m_row, twice_m_col, euler))
}

fn big_d_unchecked(twice_j: u32, twice_m_row: i32, twice_m_col: i32, euler: &EulerAngles) -> C64 {
    let angle = -0.5 * (twice_m_row as f64 * euler.phi + twice_m_col as f64 * euler.chi);
    C64::from_polar(1.0, angle) * small_d_unchecked(twice_j, twice_m_row, twice_m_col, euler.theta)
}

/// The full `(2j+1) x (2j+1)` block `D^{(j)}`, rows and columns ordered by
/// `m` descending.
pub fn d_block(twice_j: u32, euler: &EulerAngles) -> Result<DMatrix<C64>> {
    check_labels(twice_j, twice_j as i32, twice_j as i32)?;
    let n = twice_j as usize + 1;
    let m_of = |k: usize| twice_j as i32 - 2 * k as i32;
    Ok(DMatrix::from_fn(n, n, |r, c| {
        big_d_unchecked(twice_j, m_of(r), m_of(c), euler)
    }))
}

/// Column `m_col` of `D^{(j)}` obtained by expanding
/// `(g1* a1^+ + g2* a2^+)^{j+m} (-g2 a1^+ + g1 a2^+)^{j-m} |0,0> / sqrt((j+m)!(j-m)!)`
/// (with normalized couplings) in the mode Fock basis.
///
/// Returns the amplitudes on `|2j-k, k>` for `k = 0..=2j`, i.e. over `m_row`
/// descending.
pub fn dmatrix_by_expansion(twice_j: u32, twice_m_col: i32, couplings: &CouplingConfig) -> Result<Vec<C64>> {
    check_labels(twice_j, twice_j as i32, twice_m_col)?;
    let p = ((twice_j as i64 + twice_m_col as i64) / 2) as usize;
    let q = ((twice_j as i64 - twice_m_col as i64) / 2) as usize;
    let (g1, g2) = (couplings.gamma1(), couplings.gamma2());

    // poly[k] = coefficient of (a1^+)^k (a2^+)^{deg-k}
    let mut poly = vec![C64::new(1.0, 0.0)];
    let multiply = |poly: &mut Vec<C64>, x_coef: C64, y_coef: C64| {
        let mut next = vec![C64::new(0.0, 0.0); poly.len() + 1];
        for (k, a) in poly.iter().enumerate() {
            next[k + 1] += a * x_coef;
            next[k] += a * y_coef;
        }
        *poly = next;
    };
    for _ in 0..p {
        multiply(&mut poly, g1.conj(), g2.conj());
    }
    for _ in 0..q {
        multiply(&mut poly, -g2, g1);
    }

    let fact = |n: usize| (1..=n).fold(1.0f64, |acc, i| acc * i as f64);
    let norm = (fact(p) * fact(q)).sqrt();
    let two_j = twice_j as usize;
    Ok((0..=two_j)
        .map(|k| {
            let n1 = two_j - k;
            poly[n1] * (fact(n1) * fact(k)).sqrt() / norm
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

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
    fn euler_examples() {
        let c = CouplingConfig::equal_real();
        let e = c.euler();
        assert!((e.theta - FRAC_PI_2).abs() < 1e-15);
        assert_eq!((e.phi, e.chi), (0.0, 0.0));

        let c = CouplingConfig::new(C64::new(0.3, 0.4), C64::new(0.0, 0.0)).unwrap();
        assert_eq!(c.euler().theta, 0.0);
        assert!((c.gamma1().norm() - 1.0).abs() < 1e-15);

        let c = CouplingConfig::new(C64::new(0.0, 0.0), C64::new(-2.0, 0.0)).unwrap();
        assert!((c.euler().theta - PI).abs() < 1e-15);

        assert_eq!(
            CouplingConfig::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
            Err(Error::ZeroCouplings)
        );
        assert!(CouplingConfig::new(C64::new(f64::NAN, 0.0), C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn coupling_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let c = random_couplings(&mut rng);
            let (a, b) = (c.gamma1().norm(), c.gamma2().norm());
            assert!((a * a + b * b - 1.0).abs() < 1e-14);
            assert!(((c.euler().theta / 2.0).cos() - a).abs() < 1e-14);
            assert!(((c.euler().theta / 2.0).sin() - b).abs() < 1e-14);
            assert!((0.0..=PI).contains(&c.euler().theta));
            let phi1 = c.gamma1().arg();
            let phi2 = c.gamma2().arg();
            assert!((c.euler().phi - (phi1 - phi2)).abs() < 1e-15);
            assert!((c.euler().chi - (phi1 + phi2)).abs() < 1e-15);
        }
    }

    #[test]
    fn small_d_examples() {
        for tj in 0..=20u32 {
            for r in 0..=tj as i32 {
                for c in 0..=tj as i32 {
                    let (mr, mc) = (tj as i32 - 2 * r, tj as i32 - 2 * c);
                    let expected = if mr == mc { 1.0 } else { 0.0 };
                    assert!((small_d(tj, mr, mc, 0.0).unwrap() - expected).abs() < 1e-15);
                }
            }
        }
        assert!((small_d(1, 1, 1, FRAC_PI_2).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        assert!((small_d(2, -2, 2, FRAC_PI_2).unwrap() - 0.5).abs() < 1e-15);
        assert!(small_d(2, 3, 1, 0.1).is_err());
        assert!(small_d(2, 4, 2, 0.1).is_err());
    }

    #[test]
    fn big_d_examples() {
        let e = EulerAngles::new(0.0, 0.7, 0.0).unwrap();
        assert_eq!(big_d(3, 1, -1, &e).unwrap(), C64::new(small_d(3, 1, -1, 0.7).unwrap(), 0.0));
        let e = EulerAngles::new(1.3, 2.1, -0.4).unwrap();
        assert!((big_d(0, 0, 0, &e).unwrap() - 1.0).norm() < 1e-15);
        let eq = CouplingConfig::equal_real().euler();
        for tm in [1, -1] {
            assert!((big_d(1, tm, 1, &eq).unwrap() - FRAC_1_SQRT_2).norm() < 1e-15);
        }
    }

    #[test]
    fn expansion_examples() {
        let c = CouplingConfig::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        let col = dmatrix_by_expansion(1, 1, &c).unwrap();
        assert_eq!(col, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);

        let eq = CouplingConfig::equal_real();
        let col = dmatrix_by_expansion(1, 1, &eq).unwrap();
        for a in &col {
            assert!((a - FRAC_1_SQRT_2).norm() < 1e-15);
        }

        // (a1^+ + a2^+)(-a1^+ + a2^+)|0,0>/2 = (-sqrt2|2,0> + sqrt2|0,2>)/2
        let col = dmatrix_by_expansion(2, 0, &eq).unwrap();
        let expected = [-FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2];
        for (a, e) in col.iter().zip(expected) {
            assert!((a - e).norm() < 1e-15);
        }
    }

    #[test]
    fn j_half_block_matches_rotation() {
        let theta: f64 = 1.1;
        let e = EulerAngles::new(0.0, theta, 0.0).unwrap();
        let d = d_block(1, &e).unwrap();
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let expected = [[c, -s], [s, c]];
        for r in 0..2 {
            for k in 0..2 {
                assert!((d[(r, k)] - expected[r][k]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn closed_form_matches_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let cfg = random_couplings(&mut rng);
            for tj in 0..=12u32 {
                let block = d_block(tj, &cfg.euler()).unwrap();
                for col in 0..=tj as usize {
                    let tm = tj as i32 - 2 * col as i32;
                    let oracle = dmatrix_by_expansion(tj, tm, &cfg).unwrap();
                    for (row, o) in oracle.iter().enumerate() {
                        assert!(
                            (block[(row, col)] - o).norm() < 1e-12,
                            "2j={tj} row={row} col={col}: {} vs {o}",
                            block[(row, col)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn blocks_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let cfg = random_couplings(&mut rng);
            for tj in 0..=20u32 {
                let d = d_block(tj, &cfg.euler()).unwrap();
                let err = (&d * d.adjoint() - DMatrix::identity(d.nrows(), d.ncols())).camax();
                assert!(err < 1e-10, "2j={tj}: {err:e}");
            }
        }
    }

    #[test]
    fn log_factorial_path_is_unitary() {
        let e = EulerAngles::new(0.3, 0.9, -1.2).unwrap();
        // the alternating sum loses digits as j grows
        for (tj, tol) in [(41u32, 1e-9), (50, 1e-8), (64, 1e-6)] {
            let d = d_block(tj, &e).unwrap();
            let err = (&d * d.adjoint() - DMatrix::identity(d.nrows(), d.ncols())).camax();
            assert!(err < tol, "2j={tj}: {err:e}");
        }
        assert!(d_block(MAX_TWICE_J + 1, &e).is_err());
    }

    #[test]
    fn transpose_symmetry() {
        for tj in 0..=12u32 {
            for theta in [0.3, 1.7, 2.9] {
                for r in 0..=tj as i32 {
                    for c in 0..=tj as i32 {
                        let (mr, mc) = (tj as i32 - 2 * r, tj as i32 - 2 * c);
                        let sign = if ((mr - mc) / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        let a = small_d(tj, mr, mc, theta).unwrap();
                        let b = small_d(tj, mc, mr, theta).unwrap();
                        assert!((a - sign * b).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn opposite_angles_are_inverse() {
        for tj in 0..=10u32 {
            let fwd = d_block(tj, &EulerAngles::new(0.0, 0.83, 0.0).unwrap()).unwrap();
            let back = d_block(tj, &EulerAngles::new(0.0, -0.83, 0.0).unwrap()).unwrap();
            let err = (&fwd * &back - DMatrix::identity(fwd.nrows(), fwd.ncols())).camax();
            assert!(err < 1e-12);
        }
    }
}
