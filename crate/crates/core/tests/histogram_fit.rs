use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use etsim::stats::{histogram_of, uniform_edges};

#[test]
fn gaussian_histogram_passes_chi_square() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let samples: Vec<f64> = (0..n)
        .map(|_| normal.inverse_cdf(rng.gen_range(f64::EPSILON..1.0)))
        .collect();
    let edges = uniform_edges(-5.0, 5.0, 100);
    let h = histogram_of(&samples, &edges).unwrap();
    assert_eq!(h.total(), n as u64);

    // pool adjacent bins until each expects at least 5 counts, the usual
    // condition for the chi-square approximation
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (k, &c) in h.counts.iter().enumerate() {
        obs += c as f64;
        exp += n as f64 * (normal.cdf(edges[k + 1]) - normal.cdf(edges[k]));
        if exp >= 5.0 {
            cells.push((obs, exp));
            (obs, exp) = (0.0, 0.0);
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += obs;
        last.1 += exp;
    }
    assert!(cells.len() > 60);

    let chi2: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let critical = ChiSquared::new((cells.len() - 1) as f64)
        .unwrap()
        .inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 = {chi2}, critical = {critical}");
}
