use shuffledp::mechanisms::FrequencyVector;
use shuffledp::Error;

/// Mean squared error over the domain.
pub fn mse(truth: &FrequencyVector, estimate: &FrequencyVector) -> Result<f64, Error> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(Error::Input(format!(
            "frequency vectors differ in length ({} vs {})",
            truth.len(),
            estimate.len()
        )));
    }
    Ok(truth
        .0
        .iter()
        .zip(&estimate.0)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / truth.len() as f64)
}

/// MSE of the estimator that always answers `1/d`.
pub fn base_mse(truth: &FrequencyVector) -> f64 {
    let u = 1.0 / truth.len() as f64;
    truth.0.iter().map(|f| (f - u).powi(2)).sum::<f64>() / truth.len() as f64
}
