//! Time-domain performance indices and baseline-versus-compensated reports.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::Trajectory;

/// Fraction of trailing samples averaged into the final value.
pub const FINAL_WINDOW: f64 = 0.05;

/// Trapezoidal `∫₀ᵀ t·|e(t)| dt` on the grid `t_k = k·dt`.
pub fn itae(signal: &[f64], dt: f64) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::InvalidInput("ITAE of an empty series".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let weighted = |k: usize| k as f64 * dt * signal[k].abs();
    let sum: f64 = (1..signal.len()).map(|k| weighted(k - 1) + weighted(k)).sum();
    Ok(sum * dt / 2.0)
}

/// Grid time of the largest `|signal|`, earliest on ties; 0 for an empty
/// series.
pub fn peak_time(signal: &[f64], dt: f64) -> f64 {
    let mut best = 0;
    for (k, s) in signal.iter().enumerate() {
        if s.abs() > signal[best].abs() {
            best = k;
        }
    }
    best as f64 * dt
}

/// Mean of the last 5 % of the samples (at least one).
pub fn final_value(signal: &[f64]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    let window = ((signal.len() as f64 * FINAL_WINDOW).ceil() as usize).clamp(1, signal.len());
    signal[signal.len() - window..].iter().sum::<f64>() / window as f64
}

/// Largest excursion past `final_value` in the direction the signal travels
/// from its first sample, or 0 if it never crosses.
pub fn max_overshoot(signal: &[f64], final_value: f64) -> f64 {
    let Some(&first) = signal.first() else {
        return 0.0;
    };
    let direction = if final_value >= first { 1.0 } else { -1.0 };
    signal
        .iter()
        .map(|s| direction * (s - final_value))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub itae: f64,
    pub peak_time: f64,
    pub max_overshoot: f64,
}

impl ChannelMetrics {
    pub fn of(signal: &[f64], dt: f64) -> Result<Self> {
        Ok(Self {
            itae: itae(signal, dt)?,
            peak_time: peak_time(signal, dt),
            max_overshoot: max_overshoot(signal, final_value(signal)),
        })
    }
}

/// `compensated / baseline`, 1 when both are zero.
fn ratio(compensated: f64, baseline: f64) -> f64 {
    if compensated == baseline {
        1.0
    } else {
        compensated / baseline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelComparison {
    pub channel: String,
    pub baseline: ChannelMetrics,
    pub compensated: ChannelMetrics,
    /// Compensated over baseline, per metric.
    pub ratio: ChannelMetrics,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub channels: Vec<ChannelComparison>,
}

impl ComparisonReport {
    pub fn channel(&self, name: &str) -> Option<&ChannelComparison> {
        self.channels.iter().find(|c| c.channel == name)
    }

    /// Columns `channel, metric, baseline, compensated, ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["channel", "metric", "baseline", "compensated", "ratio"])?;
        for c in &self.channels {
            for (metric, b, p, r) in c.rows() {
                w.write_record([c.channel.as_str(), metric, &b.to_string(), &p.to_string(), &r.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl ChannelComparison {
    fn rows(&self) -> [(&'static str, f64, f64, f64); 3] {
        let (b, p, r) = (&self.baseline, &self.compensated, &self.ratio);
        [
            ("ITAE", b.itae, p.itae, r.itae),
            ("PT", b.peak_time, p.peak_time, r.peak_time),
            ("MO", b.max_overshoot, p.max_overshoot, r.max_overshoot),
        ]
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:<6} {:>14} {:>14} {:>10}", "channel", "metric", "K", "K+dK", "ratio")?;
        for c in &self.channels {
            for (metric, b, p, r) in c.rows() {
                writeln!(f, "{:<10} {:<6} {:>14.6} {:>14.6} {:>10.4}", c.channel, metric, b, p, r)?;
            }
        }
        Ok(())
    }
}

/// Metrics of `e_<x>` and `de_<x>` for every state channel of two runs on the
/// same grid.
pub fn compare_report(
    baseline: &Trajectory,
    compensated: &Trajectory,
    state_names: &[&str],
) -> Result<ComparisonReport> {
    if baseline.len() != compensated.len()
        || baseline.dt != compensated.dt
        || baseline.t.iter().zip(&compensated.t).any(|(a, b)| a != b)
    {
        return Err(Error::DimensionMismatch("trajectories are on different time grids".into()));
    }
    if baseline.is_empty() {
        return Err(Error::InvalidInput("empty trajectories".into()));
    }
    if baseline.e[0].len() != state_names.len() {
        return Err(Error::DimensionMismatch("state names do not match trajectory".into()));
    }
    let mut channels = Vec::new();
    for (prefix, pick) in [("e_", 0), ("de_", 1)] {
        for (i, name) in state_names.iter().enumerate() {
            let series = |traj: &Trajectory| {
                Trajectory::component(if pick == 0 { &traj.e } else { &traj.e_dot }, i)
            };
            let b = ChannelMetrics::of(&series(baseline), baseline.dt)?;
            let p = ChannelMetrics::of(&series(compensated), compensated.dt)?;
            channels.push(ChannelComparison {
                channel: format!("{prefix}{name}"),
                ratio: ChannelMetrics {
                    itae: ratio(p.itae, b.itae),
                    peak_time: ratio(p.peak_time, b.peak_time),
                    max_overshoot: ratio(p.max_overshoot, b.max_overshoot),
                },
                baseline: b,
                compensated: p,
            });
        }
    }
    Ok(ComparisonReport { channels })
}
