use onebit_mimo::admm::{softplus, t_update, x_update, AdmmVariant};
use onebit_mimo::model::{quantize_one_bit, SymbolFrame};
use onebit_mimo::scenario::{power_control, snr_order, PowerControlConfig};
use onebit_mimo::RVector;
use proptest::prelude::*;
use std::f64::consts::FRAC_1_SQRT_2;

fn betas() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-14.0f64..-8.0, 1..16).prop_map(|e| e.into_iter().map(|x| 10f64.powf(x)).collect())
}

proptest! {
    #[test]
    fn quantizer_outputs_unit_signs(z in prop::collection::vec(-1e3f64..1e3, 2..64)) {
        let z = RVector::from_vec(if z.len() % 2 == 1 { z[1..].to_vec() } else { z });
        let obs = quantize_one_bit(&z);
        let m = z.len() / 2;
        for i in 0..z.len() {
            prop_assert!(obs.r[i] == 1.0 || obs.r[i] == -1.0);
            prop_assert!(obs.r[i] * z[i] >= 0.0);
        }
        for a in 0..m {
            prop_assert!((obs.r_complex[a].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn power_control_is_scale_equivariant(beta in betas(), c in -3.0f64..3.0) {
        let pc = PowerControlConfig::default();
        let scaled: Vec<f64> = beta.iter().map(|b| b * 10f64.powf(c)).collect();
        let p1 = power_control(&beta, &pc);
        let p2 = power_control(&scaled, &pc);
        for (a, b) in p1.iter().zip(&p2) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn power_control_respects_the_cap(beta in betas(), delta in 0.0f64..30.0) {
        let pc = PowerControlConfig { p_max_w: 0.1, delta_db: delta };
        let p = power_control(&beta, &pc);
        let snr: Vec<f64> = p.iter().zip(&beta).map(|(p, b)| p * b).collect();
        let lo = snr.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = snr.iter().copied().fold(0.0, f64::max);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v <= 0.1));
        prop_assert!(hi <= lo * 10f64.powf(delta / 10.0) * (1.0 + 1e-12));
    }

    #[test]
    fn snr_order_is_an_ascending_permutation(beta in betas()) {
        let p = power_control(&beta, &PowerControlConfig::default());
        let order = snr_order(&beta, &p);
        let mut seen = order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..beta.len()).collect::<Vec<_>>());
        for w in order.windows(2) {
            prop_assert!(p[w[0]] * beta[w[0]] <= p[w[1]] * beta[w[1]]);
        }
    }

    #[test]
    fn softplus_bounds_the_hard_projection(a in -700.0f64..700.0) {
        let s = softplus(a);
        prop_assert!(s.is_finite());
        prop_assert!(s >= a.max(0.0));
        prop_assert!(s - a.max(0.0) <= std::f64::consts::LN_2 + 1e-15);
    }

    #[test]
    fn projections_land_in_their_sets(v in -50.0f64..50.0) {
        let th = t_update(v, AdmmVariant::Hard);
        prop_assert!(th >= 0.0);
        let xh = x_update(v, AdmmVariant::Hard);
        prop_assert!(xh.abs() == FRAC_1_SQRT_2);
        prop_assert!(x_update(v, AdmmVariant::Soft).abs() <= FRAC_1_SQRT_2);
        prop_assert!(t_update(v, AdmmVariant::Soft) >= th);
    }

    #[test]
    fn bits_survive_the_symbol_round_trip(bits in prop::collection::vec(0u8..2, 2..40)) {
        let bits = if bits.len() % 2 == 1 { bits[1..].to_vec() } else { bits };
        let frame = SymbolFrame::from_bits(bits.clone()).unwrap();
        let back = SymbolFrame::from_stacked_signs(&frame.x);
        prop_assert_eq!(&back.bits, &bits);
        for k in 0..frame.users() {
            prop_assert_eq!(frame.user_bit_errors(&back, k), 0);
        }
    }
}

#[test]
fn softplus_is_tight_far_from_zero() {
    assert!((softplus(30.0) - 30.0).abs() < 1e-12);
    assert!(softplus(-30.0) < 1e-12);
}
