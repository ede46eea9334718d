use num_complex::Complex64;
use proptest::prelude::*;

use etsim::events::{parse_events, write_events, Channel, EventBatch, EventFormat, EventRecord};
use etsim::grids::{
    fourier_forward, fourier_inverse, normalize_density, Axis, TimeGrid, TimeSignal,
};
use etsim::stats::{ks_two_sample, l1_distance, width_report};

fn signal(values: Vec<(f64, f64)>, t_min: f64, dt: f64) -> TimeSignal {
    let grid = TimeGrid::new(t_min, dt, values.len()).unwrap();
    TimeSignal::new(
        grid,
        values
            .into_iter()
            .map(|(a, b)| Complex64::new(a, b))
            .collect(),
    )
    .unwrap()
}

fn batch_strategy() -> impl Strategy<Value = EventBatch> {
    let trigger = (0u64..3, 1u8..8, proptest::collection::vec(-1e6f64..1e6, 3));
    proptest::collection::vec(trigger, 0..40).prop_map(|triggers| {
        let mut id = 0u64;
        let mut records = Vec::new();
        for (gap, mask, times) in triggers {
            id += gap + 1;
            for (c, ch) in [Channel::Trigger, Channel::Detector1, Channel::Detector2]
                .into_iter()
                .enumerate()
            {
                if mask & (1 << c) != 0 {
                    records.push(EventRecord {
                        trigger_id: id,
                        channel: ch,
                        time: times[c],
                    });
                }
            }
        }
        EventBatch::new(records).unwrap()
    })
}

proptest! {
    #[test]
    fn fourier_round_trip(
        values in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64),
        t_min in -50.0f64..50.0,
        dt in 0.01f64..2.0,
    ) {
        let s = signal(values, t_min, dt);
        let back = fourier_inverse(&fourier_forward(&s), s.grid()).unwrap();
        for (a, b) in s.values().iter().zip(back.values()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval(
        values in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 128),
        t_min in -50.0f64..50.0,
        dt in 0.01f64..2.0,
    ) {
        let s = signal(values, t_min, dt);
        let e = s.energy();
        prop_assert!((fourier_forward(&s).energy() - e).abs() < 1e-12 * e.max(1e-300));
    }

    #[test]
    fn l1_triangle_inequality(
        a in proptest::collection::vec(0.0f64..1.0, 50),
        b in proptest::collection::vec(0.0f64..1.0, 50),
        c in proptest::collection::vec(0.0f64..1.0, 50),
    ) {
        let axis = Axis::new(0.0, 0.1, 50).unwrap();
        let d = |v: Vec<f64>| normalize_density(v.into_iter().map(|x| x + 1e-3).collect(), axis).unwrap();
        let (a, b, c) = (d(a), d(b), d(c));
        let ab = l1_distance(&a, &b).unwrap();
        let bc = l1_distance(&b, &c).unwrap();
        let ac = l1_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn ks_symmetric_and_rescaling_invariant(
        a in proptest::collection::vec(-10.0f64..10.0, 1..60),
        b in proptest::collection::vec(-10.0f64..10.0, 1..60),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert_eq!(ab.p_value, ba.p_value);
        // a common strictly increasing map leaves the statistic unchanged
        let m = |x: &f64| (scale * x + shift).exp();
        let mapped = ks_two_sample(&a.iter().map(m).collect::<Vec<_>>(), &b.iter().map(m).collect::<Vec<_>>()).unwrap();
        prop_assert!((mapped.statistic - ab.statistic).abs() < 1e-12);
    }

    #[test]
    fn gaussian_rms_across_decades(log_sigma in -1.5f64..1.5) {
        let sigma = 10f64.powf(log_sigma);
        let axis = Axis::new(-10.0 * sigma, sigma / 50.0, 1001).unwrap();
        let d = normalize_density(axis.points().map(|t| (-0.5 * (t / sigma).powi(2)).exp()).collect(), axis).unwrap();
        let w = width_report(&d);
        prop_assert!((w.rms / sigma - 1.0).abs() < 5e-3);
        prop_assert!((w.fwhm / w.rms / (2.0 * (2.0f64.ln() * 2.0).sqrt()) - 1.0).abs() < 0.02);
    }

    #[test]
    fn events_round_trip_both_formats(batch in batch_strategy()) {
        for format in [EventFormat::Binary, EventFormat::Text] {
            let mut buf = Vec::new();
            write_events(&batch, &mut buf, format).unwrap();
            let back = parse_events(buf.as_slice(), format).unwrap();
            prop_assert_eq!(&back, &batch);
        }
    }
}
