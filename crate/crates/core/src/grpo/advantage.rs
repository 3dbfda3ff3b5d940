/// Standardize group totals with the population mean and standard deviation.
/// Groups whose standard deviation falls below `std_floor` get zero advantages.
pub fn group_advantages(totals: &[f64], std_floor: f64) -> Vec<f64> {
    let n = totals.len() as f64;
    if totals.is_empty() {
        return Vec::new();
    }
    let mean = totals.iter().sum::<f64>() / n;
    let var = totals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < std_floor {
        return vec![0.0; totals.len()];
    }
    totals.iter().map(|x| (x - mean) / std).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_group() {
        let a = group_advantages(&[2.0, 4.0, 6.0], 1e-8);
        let s = (8.0f64 / 3.0).sqrt();
        for (x, y) in a.iter().zip([-2.0 / s, 0.0, 2.0 / s]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a[2] - 1.224745).abs() < 1e-6);
    }

    #[test]
    fn degenerate_group_is_zero() {
        assert_eq!(group_advantages(&[3.0; 5], 1e-8), vec![0.0; 5]);
    }
}
