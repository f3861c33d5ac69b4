/// Sum of absolute increments of an ordered sample sequence.
pub fn total_variation(samples: &[f64]) -> f64 {
    samples.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Sum of the positive increments.
pub fn positive_variation(samples: &[f64]) -> f64 {
    samples.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
}

/// Sum of the magnitudes of the negative increments.
pub fn negative_variation(samples: &[f64]) -> f64 {
    samples.windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum()
}

/// Variation of a sampled time series at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct TvReport {
    pub x: f64,
    pub samples: usize,
    pub total_variation: f64,
    pub positive_variation: f64,
    pub negative_variation: f64,
    /// Grid width or sampling step behind the samples.
    pub resolution: f64,
}

impl TvReport {
    pub fn from_samples(x: f64, samples: &[f64], resolution: f64) -> Self {
        Self {
            x,
            samples: samples.len(),
            total_variation: total_variation(samples),
            positive_variation: positive_variation(samples),
            negative_variation: negative_variation(samples),
            resolution,
        }
    }

    /// `TV - (P + N)`; zero up to rounding for any sample set.
    pub fn consistency_gap(&self) -> f64 {
        self.total_variation - self.positive_variation - self.negative_variation
    }
}
