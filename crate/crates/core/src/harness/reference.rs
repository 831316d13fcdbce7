//! Published full-scale figures, kept for comparison only. None of them is
//! reproducible on the synthetic desk-scale corpus.

/// Frame accuracy of the 25 h clean baseline, percent.
pub const BASELINE_ACCURACY_PERCENT: f64 = 51.5;
/// Gain from adding 75 h of genuine clean speech (3x the baseline), points.
pub const CLEAN_DELTA_AT_3X: f64 = 5.6;
/// Gain from adding 75 h of noise/pitch augmentation (3x), points.
pub const MIX_DELTA_AT_3X: f64 = 3.3;
/// Augmentation multiplier at which the mix strategy matches `CLEAN_DELTA_AT_3X`.
pub const CROSSOVER_MULTIPLIER: f64 = 17.0;
/// Baseline pre-training hours.
pub const BASELINE_HOURS: f64 = 25.0;
/// Total hours of the clean-data (oracle) series.
pub const CLEAN_SERIES_HOURS: [f64; 4] = [25.0, 50.0, 75.0, 100.0];
/// Ratios used for every strategy.
pub const COMMON_RATIOS: [u32; 3] = [1, 2, 3];
/// Ratios used for the noise/pitch mix only.
pub const MIX_RATIOS: [u32; 7] = [1, 2, 3, 6, 12, 16, 20];
/// Total pre-training hours of the mix series.
pub const MIX_SERIES_HOURS: [f64; 7] = [50.0, 75.0, 100.0, 175.0, 325.0, 425.0, 525.0];

/// Total hours for a cell that adds `ratio` times the baseline.
pub fn total_hours(ratio: u32) -> f64 {
    BASELINE_HOURS * (1.0 + ratio as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hours_follow_ratios() {
        for (r, h) in MIX_RATIOS.iter().zip(MIX_SERIES_HOURS) {
            assert_eq!(total_hours(*r), h);
        }
        let clean: Vec<f64> = [0, 1, 2, 3].iter().map(|&r| total_hours(r)).collect();
        assert_eq!(clean, CLEAN_SERIES_HOURS);
    }

    #[test]
    fn mix_share_of_clean_gain() {
        // 3.3 of 5.6 points is roughly 60%
        assert!((MIX_DELTA_AT_3X / CLEAN_DELTA_AT_3X - 0.589).abs() < 0.001);
    }
}
