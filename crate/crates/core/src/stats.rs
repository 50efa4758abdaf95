//! Small order-statistics helpers shared by binning, boosting and EDA.

use num_traits::Float;

/// Median with the mean-of-middle convention for even sizes. Sorts in place.
pub fn median_in_place<T: Float>(values: &mut [T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = values.len();
    let two = T::one() + T::one();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / two
    })
}

/// Quantile of already-sorted values by linear interpolation between order
/// statistics at position `q * (n - 1)`.
pub fn quantile_sorted<T: Float>(sorted: &[T], q: T) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    if n == 1 {
        return Some(sorted[0]);
    }
    let pos = q * T::from(n - 1).unwrap();
    let lo = pos.floor();
    let lo_idx = lo.to_usize().unwrap().min(n - 1);
    let hi_idx = (lo_idx + 1).min(n - 1);
    let frac = pos - lo;
    if frac == T::zero() || lo_idx == hi_idx {
        return Some(sorted[lo_idx]);
    }
    Some(sorted[lo_idx] + (sorted[hi_idx] - sorted[lo_idx]) * frac)
}

pub fn quantile<T: Float>(values: &[T], q: T) -> Option<T> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("quantile of NaN"));
    quantile_sorted(&sorted, q)
}

pub fn mean<T: Float>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(T::zero(), |acc, &v| acc + v);
    Some(sum / T::from(values.len()).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median_in_place(&mut [10.0, 10000.0, 12.0]), Some(12.0));
        assert_eq!(median_in_place(&mut [600.0]), Some(600.0));
        assert_eq!(median_in_place(&mut [4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median_in_place::<f64>(&mut []), None);
    }

    #[test]
    fn linear_quartiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.25), Some(2.0));
        assert_eq!(quantile(&v, 0.5), Some(3.0));
        assert_eq!(quantile(&v, 0.75), Some(4.0));
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), Some(2.5));
        assert_eq!(quantile(&[1.0, 2.0, 100.0], 0.5), Some(2.0));
    }
}
