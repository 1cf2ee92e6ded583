use blindcal::bases::{coherence, dct2_basis, dct2d_lowpass_basis, gain_basis, haar2d_basis, random_signal_basis};
use blindcal::GainBasisKind;
use proptest::prelude::*;
use std::f64::consts::PI;

const KINDS: [GainBasisKind; 4] =
    [GainBasisKind::Dct, GainBasisKind::IdOffset, GainBasisKind::RandomRotated, GainBasisKind::Dct2dLowpass];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_gain_basis_is_orthonormal_with_dc_first(m in 2usize..40, frac in 0.0f64..1.0, seed in 0u64..1000, kind in 0usize..3) {
        let h = 2 + ((m - 2) as f64 * frac) as usize;
        let b = gain_basis::<f64>(m, h, KINDS[kind], seed).unwrap();
        prop_assert!(b.orthonormality_residual() < 1e-12);
        prop_assert!(b.includes_dc());
        let dc = 1.0 / (m as f64).sqrt();
        prop_assert!(b.matrix().column(0).iter().all(|v| (v - dc).abs() < 1e-12));
        let mu = b.coherence().unwrap();
        prop_assert!(mu >= 1.0 - 1e-9 && mu <= (m as f64 / h as f64).sqrt() + 1e-9);
    }

    #[test]
    fn id_offset_coherence_is_maximal(m in 2usize..64, frac in 0.0f64..1.0, seed in 0u64..100) {
        let h = 2 + ((m - 2) as f64 * frac) as usize;
        let b = gain_basis::<f64>(m, h, GainBasisKind::IdOffset, seed).unwrap();
        prop_assert!((b.coherence().unwrap() - (m as f64 / h as f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn dct_gain_coherence_stays_below_sqrt_two(e in 1u32..10, frac in 0.0f64..1.0, seed in 0u64..100) {
        let m = 1usize << e;
        let h = (2 + ((m - 2) as f64 * frac) as usize).min(m);
        let b = gain_basis::<f64>(m.max(2), h.max(2), GainBasisKind::Dct, seed).unwrap();
        prop_assert!(b.coherence().unwrap() < 2f64.sqrt());
    }

    #[test]
    fn random_signal_bases_are_orthonormal(n in 1usize..40, frac in 0.0f64..1.0, seed in 0u64..1000) {
        let k = 1 + ((n - 1) as f64 * frac) as usize;
        let z = random_signal_basis::<f64>(n, k, seed).unwrap();
        prop_assert!(z.orthonormality_residual() < 1e-12);
        prop_assert_eq!(z.rank(), k);
    }
}

/// Compares with the closed form `c_j(i) = s_j cos(π(2i+1)j / 2d)`.
#[test]
fn dct_matches_closed_form() {
    for d in [1usize, 2, 5, 16, 33] {
        let b = dct2_basis::<f64>(d).unwrap();
        for j in 0..d {
            let s = if j == 0 { (1.0 / d as f64).sqrt() } else { (2.0 / d as f64).sqrt() };
            for i in 0..d {
                let want = s * (PI * (2 * i + 1) as f64 * j as f64 / (2 * d) as f64).cos();
                assert!((b.matrix()[[i, j]] - want).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn haar_atoms_are_orthonormal_and_start_flat() {
    for side in [2usize, 4, 8, 16] {
        let n = side * side;
        let z = haar2d_basis::<f64>(side, n).unwrap();
        assert!(z.orthonormality_residual() < 1e-12);
        let flat = 1.0 / side as f64;
        assert!(z.matrix().column(0).iter().all(|v| (v - flat).abs() < 1e-12));
        // every non-DC atom has zero mean
        for j in 1..n {
            assert!(z.matrix().column(j).sum().abs() < 1e-12);
        }
    }
    assert!(haar2d_basis::<f64>(6, 4).is_err());
}

#[test]
fn lowpass_atoms_are_separable_products() {
    let side = 8;
    let b = dct2d_lowpass_basis::<f64>(side * side, 6).unwrap();
    let d = dct2_basis::<f64>(side).unwrap();
    // each atom equals an outer product of two 1-D DCT atoms
    for j in 0..6 {
        let atom = b.matrix().column(j);
        let found = (0..side).any(|u| {
            (0..side).any(|v| {
                (0..side * side).all(|idx| {
                    let (r, c) = (idx / side, idx % side);
                    (atom[idx] - d.matrix()[[r, u]] * d.matrix()[[c, v]]).abs() < 1e-12
                })
            })
        });
        assert!(found, "atom {j} is not separable");
    }
}

#[test]
fn coherence_rejects_non_orthonormal_input() {
    let m = blindcal::ndarray::Array2::from_elem((3, 2), 1.0f64);
    assert!(coherence(m.view()).is_err());
}

#[test]
fn single_precision_bases() {
    let b = gain_basis::<f32>(32, 8, GainBasisKind::Dct, 1).unwrap();
    assert!(b.orthonormality_residual() < 1e-5);
    assert!(b.coherence().unwrap() < 1.4143);
}
