//! Goodness-of-fit tests used to compare samplers and check distributional
//! claims.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Poisson};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Two-sample chi-square homogeneity test on categorical counts.
///
/// Categories empty in both samples are dropped.
pub fn chi2_two_sample<K: Ord + Clone>(
    a: &BTreeMap<K, usize>,
    b: &BTreeMap<K, usize>,
) -> TestResult {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    let (na, nb) = (na as f64, nb as f64);
    let ka = (nb / na).sqrt();
    let kb = (na / nb).sqrt();
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for k in keys {
        let x = *a.get(k).unwrap_or(&0) as f64;
        let y = *b.get(k).unwrap_or(&0) as f64;
        if x + y == 0.0 {
            continue;
        }
        bins += 1;
        statistic += (ka * x - kb * y).powi(2) / (x + y);
    }
    let dof = bins.saturating_sub(1) as f64;
    let p_value = if dof == 0.0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof).expect("positive dof").cdf(statistic)
    };
    TestResult {
        statistic,
        dof,
        p_value,
    }
}

/// Kolmogorov distribution tail `Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2)`.
fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * x * x).exp();
        sum += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    TestResult {
        statistic: d,
        dof: f64::NAN,
        p_value: kolmogorov_q((ne + 0.12 + 0.11 / ne) * d),
    }
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let ne = n.sqrt();
    TestResult {
        statistic: d,
        dof: f64::NAN,
        p_value: kolmogorov_q((ne + 0.12 + 0.11 / ne) * d),
    }
}

/// `P(Poi(mean) >= k)`.
pub fn poisson_tail(mean: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if mean <= 0.0 {
        return 0.0;
    }
    1.0 - Poisson::new(mean).expect("positive mean").cdf(k - 1)
}
