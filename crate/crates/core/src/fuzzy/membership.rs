use super::{FuzzyError, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FuzzySet {
    Low,
    Medium,
    High,
}

impl FuzzySet {
    pub const ALL: [FuzzySet; 3] = [FuzzySet::Low, FuzzySet::Medium, FuzzySet::High];
}

impl fmt::Display for FuzzySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FuzzySet::Low => "LOW",
            FuzzySet::Medium => "MEDIUM",
            FuzzySet::High => "HIGH",
        })
    }
}

fn triangle(v: f64, a: f64, b: f64, c: f64) -> f64 {
    if v < a || v > c {
        0.0
    } else if v == b {
        1.0
    } else if v < b {
        (v - a) / (b - a)
    } else {
        (c - v) / (c - b)
    }
}

/// Memberships in low (min,min,mid), medium (min,mid,max), high (mid,max,max).
pub fn fuzzify(value: f64, min: f64, max: f64) -> Result<[f64; 3]> {
    if !(min < max) {
        return Err(FuzzyError::DegenerateRange { min, max });
    }
    let mid = 0.5 * (min + max);
    Ok([triangle(value, min, min, mid), triangle(value, min, mid, max), triangle(value, mid, max, max)])
}

/// Strongest set; ties go to the lower one.
pub fn argmax_set(m: &[f64; 3]) -> FuzzySet {
    let mut best = 0;
    for i in 1..3 {
        if m[i] > m[best] {
            best = i;
        }
    }
    FuzzySet::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn peaks_and_interpolation() {
        assert_eq!(fuzzify(5.0, 0.0, 10.0).unwrap(), [0.0, 1.0, 0.0]);
        assert_eq!(fuzzify(0.0, 0.0, 10.0).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(fuzzify(10.0, 0.0, 10.0).unwrap(), [0.0, 0.0, 1.0]);
        assert_eq!(fuzzify(2.5, 0.0, 10.0).unwrap(), [0.5, 0.5, 0.0]);
        assert_eq!(argmax_set(&[0.5, 0.5, 0.0]), FuzzySet::Low);
        assert_eq!(fuzzify(1.0, 2.0, 2.0), Err(FuzzyError::DegenerateRange { min: 2.0, max: 2.0 }));
        assert_eq!(fuzzify(-1.0, 0.0, 10.0).unwrap(), [0.0; 3]);
    }

    proptest! {
        #[test]
        fn partition_properties(min in -100.0f64..100.0, width in 1e-3f64..100.0, t in 0.0f64..=1.0) {
            let max = min + width;
            let v = min + t * width;
            let m = fuzzify(v, min, max).unwrap();
            prop_assert!(m.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!(m[0] + m[2] <= 1.0 + 1e-12);
            let total: f64 = m.iter().sum();
            prop_assert!(total > 0.0 && total <= 2.0);
            // continuity: a small step moves each membership by at most step / half-width
            let h = width * 1e-6;
            let m2 = fuzzify((v + h).min(max), min, max).unwrap();
            for i in 0..3 {
                prop_assert!((m[i] - m2[i]).abs() <= 2.0 * h / width * 2.0 + 1e-9);
            }
        }
    }
}
