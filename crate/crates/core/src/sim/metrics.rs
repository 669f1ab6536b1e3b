//! Metric capture and tabular exports for scenario runs.

use super::kinematics::Pose;
use super::SimError;

/// One trajectory sample per robot per tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t_ms: f64,
    pub robot_id: String,
    pub pose: Pose,
    pub last_cmd_publisher: String,
}

/// Round-trip record of one committed message.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyRecord {
    pub tx_id: String,
    pub robot_id: String,
    pub publisher: String,
    pub publish_ms: f64,
    pub commit_ms: f64,
}

impl LatencyRecord {
    pub fn latency_ms(&self) -> f64 {
        self.commit_ms - self.publish_ms
    }
}

/// First time a robot entered the arrival radius of a task waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitRecord {
    pub task_index: usize,
    pub waypoint_index: usize,
    pub t_ms: f64,
    pub error_m: f64,
}

/// Nearest-rank percentile of an ascending-sorted slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Least-squares slope of `y` against `x`. Zero for degenerate inputs.
pub fn linear_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in points {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Yaw statistics of a trajectory: unwrapped yaw series, finite-difference
/// yaw rate, and the population variance of the rate.
#[derive(Debug, Clone, PartialEq)]
pub struct YawMetrics {
    pub yaw: Vec<f64>,
    pub rates: Vec<f64>,
    pub mean_rate: f64,
    pub rate_variance: f64,
}

/// Compute yaw metrics from `(t_ms, theta)` samples. Angles are unwrapped
/// before differencing so full rotations do not masquerade as jumps.
pub fn yaw_metrics(samples: &[(f64, f64)]) -> Result<YawMetrics, SimError> {
    if samples.len() < 2 {
        return Err(SimError::TooFewSamples(samples.len()));
    }
    let mut yaw = Vec::with_capacity(samples.len());
    let mut unwrapped = samples[0].1;
    yaw.push(unwrapped);
    for window in samples.windows(2) {
        let delta = super::kinematics::normalize_angle(window[1].1 - window[0].1);
        unwrapped += delta;
        yaw.push(unwrapped);
    }
    let mut rates = Vec::with_capacity(samples.len() - 1);
    for (i, window) in samples.windows(2).enumerate() {
        let dt_s = (window[1].0 - window[0].0) / 1000.0;
        if !(dt_s > 0.0) {
            return Err(SimError::NonPositive("sample spacing"));
        }
        rates.push((yaw[i + 1] - yaw[i]) / dt_s);
    }
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let rate_variance =
        rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / rates.len() as f64;
    Ok(YawMetrics {
        yaw,
        rates,
        mean_rate,
        rate_variance,
    })
}

/// `trajectory.csv`: t_ms, robot, x, y, theta, publisher_of_last_cmd.
pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    let mut out = String::from("t_ms,robot,x,y,theta,publisher_of_last_cmd\n");
    for s in samples {
        out.push_str(&format!(
            "{:.3},{},{:.6},{:.6},{:.6},{}\n",
            s.t_ms, s.robot_id, s.pose.x, s.pose.y, s.pose.theta, s.last_cmd_publisher
        ));
    }
    out
}

/// `latency.csv`: tx_id, publish_ms, commit_ms, latency_ms.
pub fn latency_csv(records: &[LatencyRecord]) -> String {
    let mut out = String::from("tx_id,publish_ms,commit_ms,latency_ms\n");
    for r in records {
        out.push_str(&format!(
            "{},{:.3},{:.3},{:.3}\n",
            r.tx_id,
            r.publish_ms,
            r.commit_ms,
            r.latency_ms()
        ));
    }
    out
}

/// `visits.csv`: task, waypoint_index, t_ms, error_m.
pub fn visits_csv(records: &[VisitRecord]) -> String {
    let mut out = String::from("task,waypoint_index,t_ms,error_m\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{:.3},{:.4}\n",
            r.task_index, r.waypoint_index, r.t_ms, r.error_m
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let values: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile(&values, 50.0), 50.0);
        assert_eq!(percentile(&values, 99.0), 99.0);
        assert_eq!(percentile(&values, 100.0), 100.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }

    #[test]
    fn slope_of_a_line_is_its_gradient() {
        let points: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 3.0 + 0.5 * i as f64)).collect();
        assert!((linear_slope(&points) - 0.5).abs() < 1e-12);
        assert_eq!(linear_slope(&points[..1]), 0.0);
    }

    #[test]
    fn constant_heading_has_zero_variance() {
        let samples: Vec<(f64, f64)> = (0..100).map(|i| (i as f64 * 20.0, 0.7)).collect();
        let m = yaw_metrics(&samples).unwrap();
        assert_eq!(m.rate_variance, 0.0);
        assert_eq!(m.mean_rate, 0.0);
    }

    #[test]
    fn pure_rotation_has_zero_variance_and_mean_rate_w() {
        // Constant w = 1.5 rad/s sampled at 50 Hz; wrapping must not
        // disturb the rate estimate.
        let w = 1.5;
        let samples: Vec<(f64, f64)> = (0..500)
            .map(|i| {
                let t = i as f64 * 0.02;
                (t * 1000.0, super::super::kinematics::normalize_angle(w * t))
            })
            .collect();
        let m = yaw_metrics(&samples).unwrap();
        assert!(m.rate_variance < 1e-18, "variance {}", m.rate_variance);
        assert!((m.mean_rate - w).abs() < 1e-9);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(yaw_metrics(&[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn csv_headers_match_schemas() {
        assert!(trajectory_csv(&[]).starts_with("t_ms,robot,x,y,theta,publisher_of_last_cmd\n"));
        assert!(latency_csv(&[]).starts_with("tx_id,publish_ms,commit_ms,latency_ms\n"));
        assert!(visits_csv(&[]).starts_with("task,waypoint_index,t_ms,error_m\n"));
    }
}
