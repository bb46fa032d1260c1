/// Pairwise (cascade) summation.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(x) / x.len() as f64
}

/// Standard error of the mean; zero for fewer than two samples.
pub fn std_error(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    let dev: Vec<f64> = x.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&x), 5050.0);
        assert_eq!(mean(&x), 50.5);
        let sd = (x.iter().map(|v| (v - 50.5).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!((std_error(&x) - sd / 10.0).abs() < 1e-12);
        assert_eq!(std_error(&[3.0]), 0.0);
        assert!(mean(&[]).is_nan());
    }
}
