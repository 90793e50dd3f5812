use crate::ved::TripSeries;

/// Descriptive statistics of a trip's speed channel (km/h).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedStats {
    pub mean: f64,
    /// population standard deviation
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub duration_s: f64,
}

pub fn speed_stats(speeds: &[f64]) -> Option<SpeedStats> {
    if speeds.is_empty() {
        return None;
    }
    let n = speeds.len() as f64;
    let mean = speeds.iter().sum::<f64>() / n;
    let var = speeds.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = speeds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    Some(SpeedStats {
        mean,
        std: var.sqrt(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        median,
        duration_s: 0.0,
    })
}

/// `None` when the trip has no speed samples.
pub fn speed_features(trip: &TripSeries) -> Option<SpeedStats> {
    let speeds: Vec<f64> = trip.samples.iter().filter_map(|s| s.speed).collect();
    speed_stats(&speeds).map(|s| SpeedStats {
        duration_s: trip.duration_s(),
        ..s
    })
}
