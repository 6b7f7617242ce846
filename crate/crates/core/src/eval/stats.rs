use serde::{Deserialize, Serialize};

use super::EvalError;

/// Unbiased pass@k: `1 - C(n-c, k) / C(n, k)`, computed as a running
/// product so no binomial is ever formed.
pub fn pass_at_k(n: u32, c: u32, k: u32) -> Result<f64, EvalError> {
    if c > n || k == 0 || k > n {
        return Err(EvalError::Domain(format!("pass@k needs 0 <= c <= n and 1 <= k <= n (n={n}, c={c}, k={k})")));
    }
    if c == 0 {
        return Ok(0.0);
    }
    if n - c < k {
        return Ok(1.0);
    }
    // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k/i)
    let prod: f64 = (n - c + 1..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - prod)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; absent for a single value.
    pub sd: Option<f64>,
}

/// Arithmetic mean and the n-1 sample standard deviation.
pub fn mean_sd(values: &[f64]) -> Result<MeanSd, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Domain("mean of an empty list".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() >= 2).then(|| {
        let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    Ok(MeanSd { mean, sd })
}
