//! Local tempo tracking with a two-regime switching Kalman filter.
//!
//! Tempo is in seconds per tick. The state follows a random walk whose step size
//! scales with the previous note value; each observed IOI is the note value times the
//! tempo plus Gaussian noise from one of two regimes (motor noise, timing errors).

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::Ticks;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TempoParams {
    pub sigma_v: f64,
    pub sigma_t1: f64,
    pub sigma_t2: f64,
    pub xi1: f64,
    /// Reference tempo, seconds per tick.
    pub v0: f64,
    pub ticks_per_quarter: u32,
    /// Variance of the initial tempo; `(0.1 v0)^2` when unset.
    pub prior_variance: Option<f64>,
}

impl TempoParams {
    pub fn new(v0: f64, ticks_per_quarter: u32) -> Self {
        TempoParams {
            sigma_v: 0.03,
            sigma_t1: 0.014,
            sigma_t2: 0.16,
            xi1: 0.95,
            v0,
            ticks_per_quarter,
            prior_variance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0) || !self.v0.is_finite() {
            return Err(Error::input(format!("reference tempo {} must be positive", self.v0)));
        }
        if !(self.sigma_v > 0.0 && self.sigma_t1 > 0.0 && self.sigma_t2 > 0.0) {
            return Err(Error::input("tempo noise deviations must be positive"));
        }
        if !(self.xi1 > 0.0 && self.xi1 <= 1.0) {
            return Err(Error::input(format!("xi1 {} outside (0, 1]", self.xi1)));
        }
        if self.ticks_per_quarter == 0 {
            return Err(Error::input("ticks per quarter is zero"));
        }
        if let Some(p) = self.prior_variance {
            if !(p > 0.0) {
                return Err(Error::input("prior variance must be positive"));
            }
        }
        Ok(())
    }

    /// Range the tempo estimate is clamped to, seconds per tick.
    pub fn bounds(&self) -> (f64, f64) {
        (self.v0 / 8.0, 8.0 * self.v0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TempoState {
    pub mean: f64,
    pub variance: f64,
    pub step: usize,
    /// Posterior probability of the motor-noise regime at the last step.
    pub regime: f64,
}

impl TempoState {
    pub fn init(params: &TempoParams) -> Result<Self> {
        params.validate()?;
        Ok(TempoState {
            mean: params.v0,
            variance: params.prior_variance.unwrap_or((0.1 * params.v0).powi(2)),
            step: 0,
            regime: 1.0,
        })
    }

    /// Clamped filtered tempo.
    pub fn estimate(&self, params: &TempoParams) -> f64 {
        let (lo, hi) = params.bounds();
        self.mean.clamp(lo, hi)
    }

    /// Incorporates one IOI `dt` observed over `nu` ticks, `nu_prev` being the
    /// preceding note value.
    pub fn step(&self, nu_prev: f64, nu: f64, dt: f64, params: &TempoParams) -> Result<Self> {
        if !(nu > 0.0 && dt > 0.0 && nu_prev > 0.0) || !(nu.is_finite() && dt.is_finite() && nu_prev.is_finite()) {
            return Err(Error::input(format!("tempo step needs positive inputs (nu_prev {nu_prev}, nu {nu}, dt {dt})")));
        }
        let q = (params.sigma_v * nu_prev * params.v0 / params.ticks_per_quarter as f64).powi(2);
        let prior_var = self.variance + q;
        let regimes: &[(f64, f64)] = if params.xi1 >= 1.0 {
            &[(1.0, params.sigma_t1)]
        } else {
            &[(params.xi1, params.sigma_t1), (1.0 - params.xi1, params.sigma_t2)]
        };
        let resid = dt - nu * self.mean;
        let mut branches = Vec::with_capacity(2);
        for &(w, sigma) in regimes {
            let s = nu * nu * prior_var + sigma * sigma;
            let gain = prior_var * nu / s;
            let log_like = w.ln() - 0.5 * (resid * resid / s + (2.0 * PI * s).ln());
            branches.push((log_like, self.mean + gain * resid, (1.0 - gain * nu) * prior_var));
        }
        let top = branches.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = branches.iter().map(|b| (b.0 - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mean: f64 = branches.iter().zip(&weights).map(|(b, w)| w * b.1).sum::<f64>() / total;
        let variance: f64 = branches
            .iter()
            .zip(&weights)
            .map(|(b, w)| w * (b.2 + (b.1 - mean).powi(2)))
            .sum::<f64>()
            / total;
        let (lo, hi) = params.bounds();
        Ok(TempoState {
            mean: mean.clamp(lo, hi),
            variance: variance.max(f64::MIN_POSITIVE),
            step: self.step + 1,
            regime: weights[0] / total,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TempoRow {
    pub step: usize,
    pub time: f64,
    pub nu: Ticks,
    pub tempo: f64,
    pub regime: f64,
}

/// Sequence of tempo estimates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TempoTrack {
    pub rows: Vec<TempoRow>,
}

impl TempoTrack {
    const HEADER: &'static str = "step\ttime_s\tnu_ticks\ttempo_s_per_tick\tregime";

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}\t{:e}\t{}", r.step, r.time, r.nu, r.tempo, r.regime);
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if n == 0 && line.starts_with("step") || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(Error::parse(n + 1, "expected 5 tab-separated fields"));
            }
            let bad = |_| Error::parse(n + 1, format!("bad tempo row `{line}`"));
            rows.push(TempoRow {
                step: f[0].parse().map_err(|_| Error::parse(n + 1, "bad step"))?,
                time: f[1].parse().map_err(bad)?,
                nu: f[2].parse().map_err(|_| Error::parse(n + 1, "bad tick count"))?,
                tempo: f[3].parse().map_err(bad)?,
                regime: f[4].parse().map_err(bad)?,
            });
        }
        Ok(TempoTrack { rows })
    }
}
