// Monte Carlo check of the two-point gradient estimator on a linear function.
//
// For `f(x) = a·x` each sample equals `d (a·u) u`, whose mean over the unit
// sphere is `a`. The per-sample value does not depend on the radius.
//
// ```bash
// cargo run --release --example estimator_check -- 100000
// ```

use gridtune::zo::{sample_unit_direction, two_point_gradient};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct EstimatorReport {
    pub slope: Vec<f64>,
    pub mean: Vec<f64>,
    /// Largest per-sample difference between radii 1e-3, 0.1 and 1.
    pub radius_spread: f64,
}

pub fn run_example(samples: usize, seed: u64) -> anyhow::Result<EstimatorReport> {
    let d = 5;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let slope: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let f = |x: &[f64]| x.iter().zip(&slope).map(|(x, a)| x * a).sum::<f64>();
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();

    let mut mean = vec![0.0; d];
    let mut radius_spread: f64 = 0.0;
    for _ in 0..samples {
        let u = sample_unit_direction(d, &mut rng)?;
        let g = two_point_gradient(f, &x, 0.1, &u)?;
        for (m, gj) in mean.iter_mut().zip(&g) {
            *m += gj / samples as f64;
        }
        for r in [1e-3, 1.0] {
            let other = two_point_gradient(f, &x, r, &u)?;
            radius_spread = g.iter().zip(&other).map(|(a, b)| (a - b).abs()).fold(radius_spread, f64::max);
        }
    }
    Ok(EstimatorReport { slope, mean, radius_spread })
}

fn main() -> anyhow::Result<()> {
    let samples = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100_000);
    let report = run_example(samples, 11)?;
    println!("{:>10} {:>10} {:>9}", "slope", "estimate", "rel err");
    for (a, m) in report.slope.iter().zip(&report.mean) {
        println!("{a:>10.5} {m:>10.5} {:>8.2}%", 100.0 * (m - a).abs() / a.abs());
    }
    println!("radius spread over {{1e-3, 0.1, 1}}: {:.2e}", report.radius_spread);
    Ok(())
}
