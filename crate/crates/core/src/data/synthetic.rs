use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::{Dataset, Split};

/// Cylinder-bell-funnel set with `per_class` series per class.
///
/// Each series is `(6 + η) · shape(t) + ε(t)` with `η, ε ~ N(0, 1)`, where
/// the shape is an indicator (cylinder), a rising ramp (bell) or a falling
/// ramp (funnel) on an interval `[a, b]`. Interval bounds follow the
/// classic length-128 recipe scaled to `length`. Labels are 1, 2, 3.
pub fn cbf(per_class: usize, length: usize, seed: u64) -> Result<Dataset> {
    if per_class == 0 || length < 8 {
        return Err(Error::Contract(format!(
            "cbf needs per_class >= 1 and length >= 8, got {per_class} and {length}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let scale = length as f64 / 128.0;
    let mut series = Vec::with_capacity(3 * per_class);
    let mut labels = Vec::with_capacity(3 * per_class);
    for i in 0..3 * per_class {
        let class = i % 3;
        let a = rng.gen_range(16.0..32.0) * scale;
        let b = a + rng.gen_range(32.0..96.0) * scale;
        let amplitude = 6.0 + normal.sample(&mut rng);
        let s = (0..length)
            .map(|t| {
                let t = t as f64;
                let inside = if (a..=b).contains(&t) { 1.0 } else { 0.0 };
                let shape = match class {
                    0 => inside,
                    1 => inside * (t - a) / (b - a),
                    _ => inside * (b - t) / (b - a),
                };
                amplitude * shape + normal.sample(&mut rng)
            })
            .collect();
        series.push(s);
        labels.push((class + 1) as f64);
    }
    Dataset::from_raw("CBF", Split::Train, series, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_balance() {
        let d = cbf(10, 128, 1).unwrap();
        assert_eq!((d.len(), d.length(), d.num_classes()), (30, 128, 3));
        assert_eq!(d.class_counts(), vec![10, 10, 10]);
        assert_eq!(d, cbf(10, 128, 1).unwrap());
    }
}
