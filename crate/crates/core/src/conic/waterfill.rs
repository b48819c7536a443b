use crate::error::{DamError, Result};

/// Common water level `lambda` with `sum_k (lambda - inverse_gains[k])^+ = budget`.
pub fn water_level(inverse_gains: &[f64], budget: f64) -> Result<f64> {
    if inverse_gains.is_empty() {
        return Err(DamError::EmptyInput("water-filling needs at least one channel"));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(DamError::InvalidConfig(format!("water-filling budget must be positive, got {budget}")));
    }
    if let Some(g) = inverse_gains.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(DamError::InvalidConfig(format!("inverse gain must be finite and positive, got {g}")));
    }
    let mut sorted = inverse_gains.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut floor_sum = 0.0;
    for n in 1..=sorted.len() {
        floor_sum += sorted[n - 1];
        let level = (budget + floor_sum) / n as f64;
        if n == sorted.len() || level <= sorted[n] {
            return Ok(level);
        }
    }
    unreachable!("loop returns on the last channel")
}

/// Classical water-filling: `P_k = (lambda - inverse_gains[k])^+`.
pub fn water_fill(inverse_gains: &[f64], budget: f64) -> Result<Vec<f64>> {
    let level = water_level(inverse_gains, budget)?;
    Ok(inverse_gains.iter().map(|&g| (level - g).max(0.0)).collect())
}
