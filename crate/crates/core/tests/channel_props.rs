use proptest::prelude::*;
use swipt_core::channel::{inversion_power, link_rate, FadingSample, GainStream, LinkBudget};

#[test]
fn empirical_cdf_matches_unit_exponential() {
    let mut s = GainStream::new(2024, 0);
    let n = 100_000;
    let mut xs: Vec<f64> = (0..n).map(|_| s.draw().gain_sq()).collect();
    xs.sort_by(f64::total_cmp);
    // Kolmogorov–Smirnov statistic against F(x) = 1 − e^{−x}.
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x).exp();
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            (f - lo).abs().max((hi - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 0.01, "KS statistic {d}");
    assert!(xs[0] >= 0.0);
}

proptest! {
    #[test]
    fn inversion_roundtrip(rate in 0.01f64..4.0, g in 1e-3f64..20.0, sigma2 in 0.1f64..10.0, d in 0.5f64..3.0) {
        let gain = FadingSample::new(g).unwrap();
        let p = inversion_power(rate, gain, sigma2, d).unwrap();
        let achieved = link_rate(gain, &LinkBudget::new(p, sigma2, d).unwrap());
        prop_assert!(((achieved - rate) / rate).abs() < 1e-9, "{achieved} vs {rate}");
    }

    #[test]
    fn rate_increases_with_gain_and_power(g in 0.0f64..10.0, dg in 1e-6f64..1.0, p in 0.1f64..100.0, dp in 1e-3f64..10.0) {
        let b = LinkBudget::new(p, 1.0, 1.0).unwrap();
        let r = link_rate(FadingSample::new(g).unwrap(), &b);
        prop_assert!(link_rate(FadingSample::new(g + dg).unwrap(), &b) > r);
        if g > 0.0 {
            let louder = LinkBudget::new(p + dp, 1.0, 1.0).unwrap();
            prop_assert!(link_rate(FadingSample::new(g).unwrap(), &louder) > r);
        }
    }

    #[test]
    fn draws_are_reproducible(seed in any::<u64>(), stream in 0u64..1000) {
        let mut a = GainStream::new(seed, stream);
        let mut b = GainStream::new(seed, stream);
        for _ in 0..32 {
            let (x, y) = (a.draw(), b.draw());
            prop_assert!(x.gain_sq() >= 0.0);
            prop_assert_eq!(x.gain_sq().to_bits(), y.gain_sq().to_bits());
        }
    }
}
