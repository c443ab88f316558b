use num_complex::Complex64;
use rayon::prelude::*;

use super::fit::{optimize_frequencies, prepare, rss, FitOptions};
use crate::error::{Error, Result};
use crate::estimator::CorrelationSeries;

const OVERSAMPLE: f64 = 8.0;

/// Common step of the (uniform) grids and the longest point count.
fn grid_step(series: &[CorrelationSeries]) -> Result<(f64, usize)> {
    let mut step: Option<f64> = None;
    let mut longest = 0;
    for s in series {
        let t = s.times();
        longest = longest.max(t.len());
        if t.len() < 2 {
            continue;
        }
        let dt = t[1] - t[0];
        if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
            return Err(Error::InvalidGrid(format!("series {} is not uniformly sampled", s.channel())));
        }
        match step {
            Some(d) if (d - dt).abs() > 1e-9 * d.max(1.0) => {
                return Err(Error::InvalidGrid("series use different time steps".into()));
            }
            _ => step = Some(dt),
        }
    }
    let dt = step.ok_or_else(|| Error::InvalidGrid("need at least one series with two points".into()))?;
    Ok((dt, longest))
}

fn check_resolution(requested: usize, points: usize) -> Result<()> {
    let resolvable = points / 2;
    if requested > resolvable {
        return Err(Error::InsufficientResolution { requested, resolvable });
    }
    Ok(())
}

/// Candidate frequencies `(0, π/dt]` at 8× the Rayleigh density.
fn frequency_grid(dt: f64, points: usize) -> Vec<f64> {
    let step = 2.0 * std::f64::consts::PI / (points as f64 * dt) / OVERSAMPLE;
    let max = std::f64::consts::PI / dt;
    (1..).map(|k| k as f64 * step).take_while(|&w| w <= max + 1e-12).collect()
}

/// Stacked power `Σ_c |Σ_k (C_c(t_k) − mean_c) e^{iωt_k}|²` at each `omega`.
pub fn periodogram(series: &[CorrelationSeries], omegas: &[f64]) -> Vec<f64> {
    let centred: Vec<(Vec<f64>, Vec<Complex64>)> = series
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let mean = s.corrected().iter().sum::<Complex64>() / s.len() as f64;
            (s.times().to_vec(), s.corrected().iter().map(|z| z - mean).collect())
        })
        .collect();
    omegas
        .par_iter()
        .map(|&w| {
            centred
                .iter()
                .map(|(t, y)| t.iter().zip(y).map(|(&t, z)| z * Complex64::from_polar(1.0, w * t)).sum::<Complex64>().norm_sqr())
                .sum()
        })
        .collect()
}

/// Up to `max_count` periodogram peaks, strongest first, returned ascending.
/// Peaks are refined by a parabola through the three grid points around
/// each maximum. A constant input yields no peaks.
pub fn estimate_frequencies(series: &[CorrelationSeries], max_count: usize) -> Result<Vec<f64>> {
    let (dt, points) = grid_step(series)?;
    check_resolution(max_count, points)?;
    let grid = frequency_grid(dt, points);
    let power = periodogram(series, &grid);
    let peak = power.iter().cloned().fold(0.0, f64::max);
    let energy: f64 = series.iter().flat_map(|s| s.corrected()).map(|z| z.norm_sqr()).sum();
    if peak <= 1e-20 * energy.max(f64::MIN_POSITIVE) * (points * points) as f64 || peak == 0.0 {
        return Ok(Vec::new());
    }
    let step = grid[0];
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for k in 0..grid.len() {
        let left = if k > 0 { power[k - 1] } else { f64::NEG_INFINITY };
        let right = power.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
        if power[k] > left && power[k] >= right && power[k] > 1e-6 * peak {
            let mut w = grid[k];
            if k > 0 && k + 1 < grid.len() {
                let denom = left - 2.0 * power[k] + right;
                if denom < 0.0 {
                    w += 0.5 * step * (left - right) / denom;
                }
            }
            peaks.push((w, power[k]));
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out: Vec<f64> = peaks.into_iter().take(max_count).map(|p| p.0).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Greedy seeding for lines closer than the Rayleigh limit: repeatedly adds
/// the grid frequency that most reduces the projected residual, then refits
/// all frequencies jointly. Returns `count` frequencies, ascending.
pub fn seed_frequencies(series: &[CorrelationSeries], count: usize, options: &FitOptions) -> Result<Vec<f64>> {
    let (dt, points) = grid_step(series)?;
    check_resolution(count, points)?;
    let data = prepare(series)?;
    let grid = frequency_grid(dt, points);
    let mut current: Vec<f64> = Vec::with_capacity(count);
    for _ in 0..count {
        let best = grid
            .par_iter()
            .filter(|w| current.iter().all(|c| (*c - **w).abs() > 1e-9))
            .map(|&w| {
                let mut trial = current.clone();
                trial.push(w);
                (w, rss(&data, &trial, options.constant))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((w, _)) = best else { break };
        current.push(w);
        current = optimize_frequencies(&data, &current, options).omegas;
    }
    current.sort_by(f64::total_cmp);
    Ok(current)
}
