use serde::{Deserialize, Serialize};

/// Reduce-on-plateau learning rate: `initial · 2^(-k/3)` after `k`
/// reductions.
///
/// A reduction happens after `patience` consecutive epochs without a
/// strictly lower monitored score. Reductions stop once the rate has gone
/// below `floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub initial: f64,
    pub floor: f64,
    pub patience: usize,
    pub reductions: u32,
    pub best: Option<f64>,
    pub since_best: usize,
}

impl PlateauSchedule {
    pub fn new(initial: f64, floor: f64, patience: usize) -> Self {
        PlateauSchedule {
            initial,
            floor,
            patience,
            reductions: 0,
            best: None,
            since_best: 0,
        }
    }

    pub fn rate_after(initial: f64, reductions: u32) -> f64 {
        initial * 2f64.powf(-f64::from(reductions) / 3.0)
    }

    pub fn rate(&self) -> f64 {
        Self::rate_after(self.initial, self.reductions)
    }

    /// True once no further reduction will happen.
    pub fn is_clamped(&self) -> bool {
        self.rate() < self.floor
    }

    /// Records one epoch's score and returns the rate for the next epoch.
    pub fn observe(&mut self, score: f64) -> f64 {
        if self.best.is_none_or(|b| score < b) {
            self.best = Some(score);
            self.since_best = 0;
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience && !self.is_clamped() {
                self.reductions += 1;
                self.since_best = 0;
            }
        }
        self.rate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improving_scores_keep_the_rate() {
        let mut s = PlateauSchedule::new(1e-3, 1e-4, 3);
        for i in 0..50 {
            assert_eq!(s.observe(1.0 / (i + 1) as f64), 1e-3);
        }
    }

    #[test]
    fn stalls_reduce_then_clamp() {
        let mut s = PlateauSchedule::new(1e-3, 1e-4, 2);
        s.observe(1.0);
        let mut rates = vec![];
        for _ in 0..40 {
            rates.push(s.observe(1.0));
        }
        assert!((rates[1] - 7.937005259840998e-4).abs() < 1e-15);
        assert_eq!(s.reductions, 10);
        assert!(s.is_clamped());
        assert!((s.rate() - 9.921256574801247e-5).abs() < 1e-18);
    }
}
