use statrs::distribution::{ContinuousCDF, Gamma};

/// P(Z <= z) for a Rician amplitude with mean amplitude u and complex noise
/// power σ², as a Poisson mixture of chi-square CDFs.
pub fn rician_cdf(z: f64, u: f64, noise_power: f64) -> f64 {
    let half = 0.5 * noise_power;
    let lambda = u * u / half;
    let x = z * z / half;
    let mut total = 0.0;
    let mut weight = (-0.5 * lambda).exp();
    for j in 0..2000 {
        if j > 0 {
            weight *= 0.5 * lambda / j as f64;
        }
        total += weight * Gamma::new(1.0 + j as f64, 0.5).unwrap().cdf(x);
        if j as f64 > 0.5 * lambda && weight < 1e-17 {
            break;
        }
    }
    total
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in samples.iter().enumerate() {
        let f = cdf(v);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// KS critical value at α = 0.01 for large n.
pub fn ks_critical(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}
