use isabc_core::channel::{draw_channel, plan_delays, validate_plan, ChannelModel, ChannelRealization};
use isabc_core::detection::{all_bin_sets, analytical_pmd};
use isabc_core::harness::{PointContext, Scenario};
use isabc_core::metrics::{bd_rate, primary_rate};
use isabc_core::stats::{chi2_cdf, chi2_quantile, noncentral_chi2_cdf};
use isabc_core::waveform::{AffineTransform, Qam};
use isabc_core::{ComplexBlock, Domain, SystemConfig};
use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg_with(n: usize, c1p: usize, cp: usize, dtau: usize) -> SystemConfig {
    let mut m = SystemConfig::table1_map();
    m.set("n", n).set("c1_prime", c1p).set("cp_len", cp).set("delta_tau", dtau);
    SystemConfig::from_map(&m).unwrap()
}

fn block(values: &[(f64, f64)]) -> ComplexBlock<f64> {
    ComplexBlock::new(values.iter().map(|&(r, i)| Complex::new(r, i)).collect(), Domain::Affine)
}

fn energy(b: &ComplexBlock<f64>) -> f64 {
    b.samples().iter().map(|v| v.norm_sqr()).sum()
}

fn affine_input() -> impl Strategy<Value = (usize, usize, Vec<(f64, f64)>)> {
    (2usize..7, 1usize..4).prop_flat_map(|(log_n, log_c)| {
        let n = 1usize << log_n;
        let c1p = (1usize << log_c).min(n);
        (Just(n), Just(c1p), prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idaft_preserves_energy_and_inverts((n, c1p, x) in affine_input(), c2 in 0.0..1.0f64) {
        let tr = AffineTransform::<f64>::with_params(n, c1p as f64 / (2 * n) as f64, c2);
        let x = block(&x);
        let s = tr.idaft(&x).unwrap();
        prop_assert!((energy(&s) - energy(&x)).abs() <= 1e-10 * (1.0 + energy(&x)));
        let back = tr.daft(&s).unwrap();
        for (a, b) in back.samples().iter().zip(x.samples()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn idaft_is_linear((n, c1p, x) in affine_input(), gain in (-2.0..2.0f64, -2.0..2.0f64)) {
        let tr = AffineTransform::<f64>::with_params(n, c1p as f64 / (2 * n) as f64, 0.0);
        let x = block(&x);
        let y = ComplexBlock::new(x.samples().iter().rev().copied().collect(), Domain::Affine);
        let g = Complex::new(gain.0, gain.1);
        let lhs = tr.idaft(&x.scale(g).add(&y).unwrap()).unwrap();
        let rhs = tr.idaft(&x).unwrap().scale(g).add(&tr.idaft(&y).unwrap()).unwrap();
        for (a, b) in lhs.samples().iter().zip(rhs.samples()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn every_plan_within_capacity_validates(
        log_n in 6usize..11,
        log_c in 1usize..5,
        cp_frac in 0.05..0.5f64,
        dtau in 1usize..4,
        lf in 1usize..4,
        d in 1usize..5,
        pick in 0.0..1.0f64,
    ) {
        let n = 1usize << log_n;
        let cp = ((n as f64 * cp_frac) as usize).max(d + 1);
        let cfg = cfg_with(n, 1 << log_c, cp, dtau);
        let zmax = plan_delays(&cfg, d - 1, lf, d, 0).unwrap().z_max;
        let z = (pick * (zmax + 1) as f64) as usize;
        let plan = plan_delays(&cfg, d - 1, lf, d, z.min(zmax)).unwrap();
        prop_assert!(validate_plan(&plan, &cfg).is_ok());
        prop_assert!(plan_delays(&cfg, d - 1, lf, d, zmax + 1).is_err());
        for w in plan.delays.windows(2) {
            prop_assert!(w[1] - w[0] >= plan.delta_min);
        }
    }

    #[test]
    fn scheduled_devices_have_disjoint_bins(z in 0usize..12, lf in 1usize..4, d in 1usize..4) {
        let cfg = SystemConfig::table1();
        let sc = Scenario { devices: z, forward_taps: lf, direct_taps: d, ..Scenario::default() };
        let ctx = PointContext::new(&cfg, &sc).unwrap();
        let sets = all_bin_sets(&ctx.plan, &cfg).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for s in &sets {
            prop_assert_eq!(s.len(), lf);
            for &b in s {
                prop_assert!(seen.insert(b));
            }
        }
    }

    #[test]
    fn chi2_quantile_inverts_cdf(p in 1e-9..0.999_999f64, k in 1usize..16) {
        let dof = 2.0 * k as f64;
        let x = chi2_quantile(p, dof).unwrap();
        prop_assert!((chi2_cdf(x, dof).unwrap() - p).abs() <= 1e-9 * p.max(1e-3));
    }

    #[test]
    fn noncentral_cdf_decreases_with_lambda(x in 0.1..80.0f64, k in 1usize..6, l1 in 0.0..60.0f64, dl in 0.01..20.0f64) {
        let dof = 2.0 * k as f64;
        let a = noncentral_chi2_cdf(x, dof, l1).unwrap();
        let b = noncentral_chi2_cdf(x, dof, l1 + dl).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn pmd_is_a_probability_falling_with_signal(lambda in 0.0..200.0f64, k in 1usize..5) {
        let p0 = analytical_pmd(lambda, k, 1e-3).unwrap();
        let p1 = analytical_pmd(lambda * 1.5 + 1.0, k, 1e-3).unwrap();
        prop_assert!((0.0..=1.0 - 1e-3 + 1e-9).contains(&p0));
        prop_assert!(p1 <= p0 + 1e-12);
    }

    #[test]
    fn rates_are_non_negative_and_monotone(s in 0.0..1e4f64, ds in 0.0..1e3f64, w in 1e3..1e8f64) {
        prop_assert!(bd_rate(s, 1.0, w) >= 0.0);
        prop_assert!(bd_rate(s + ds, 1.0, w) >= bd_rate(s, 1.0, w));
        prop_assert!(primary_rate(s + ds, w) >= primary_rate(s, w));
        prop_assert_eq!(primary_rate(0.0, w), 0.0);
    }

    #[test]
    fn qam_round_trips_bits(order_log in 1u32..5, seed in any::<u64>()) {
        let qam = Qam::new(4usize.pow(order_log)).unwrap();
        let bits: Vec<u8> = (0..qam.bits_per_symbol() * 8).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let symbols = qam.map_all::<f64>(&bits);
        let mut out = Vec::new();
        for s in symbols {
            qam.demap(s, &mut out);
        }
        prop_assert_eq!(out, bits);
    }

    #[test]
    fn config_text_round_trips(log_n in 6usize..11, alpha in 0.0..=1.0f64, snr in -20.0..40.0f64) {
        let n = 1usize << log_n;
        let cfg = SystemConfig::table1().with(&[("n", n as f64), ("cp_len", (n / 4) as f64), ("alpha", alpha), ("snr_db", snr)]).unwrap();
        prop_assert_eq!(SystemConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn channel_csv_round_trips(seed in any::<u64>(), devices in 0usize..5) {
        let cfg = SystemConfig::table1();
        let model = ChannelModel::new(3, 2, devices);
        let chan: ChannelRealization<f64> = draw_channel(&cfg, &model, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut buf = Vec::new();
        chan.write_csv(&mut buf).unwrap();
        prop_assert_eq!(ChannelRealization::read_csv(buf.as_slice()).unwrap(), chan);
    }
}
