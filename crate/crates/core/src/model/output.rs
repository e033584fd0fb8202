//! Pitch and IOI output distributions of bottom states.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::segment::{StateLayout, Successions};
use super::StateType;
use crate::error::{Error, Result};
use crate::ioi::{DistSpec, IoiComponent, IoiLabel, IoiMixture, IoiParams};
use crate::score::Pitch;

pub const PITCHES: usize = 128;
/// Lowest density any IOI term may take.
pub const DENSITY_FLOOR: f64 = 1e-12;
const NEAR_MISS_WEIGHT: f64 = 10.0;

/// Categorical pitch distribution: `1 - error_rate` over the weighted score pitches,
/// `error_rate` over all others with extra weight a semitone or an octave away.
pub fn pitch_distribution(pitches: &[(Pitch, f64)], error_rate: f64) -> Result<Vec<f64>> {
    if !(0.0..=0.2).contains(&error_rate) {
        return Err(Error::InvalidModel(format!("pitch error rate {error_rate} outside [0, 0.2]")));
    }
    let mut dist = vec![0.0; PITCHES];
    let total: f64 = pitches.iter().map(|(_, w)| w).sum();
    if pitches.is_empty() || total <= 0.0 {
        return Ok(vec![1.0 / PITCHES as f64; PITCHES]);
    }
    for &(p, w) in pitches {
        dist[p.midi() as usize] += (1.0 - error_rate) * w / total;
    }
    let mut other = vec![0.0; PITCHES];
    for (m, o) in other.iter_mut().enumerate() {
        if dist[m] == 0.0 {
            *o = 1.0;
        }
    }
    for &(p, _) in pitches {
        for d in [-12, -1, 1, 12] {
            if let Some(q) = p.offset(d) {
                let q = q.midi() as usize;
                if dist[q] == 0.0 {
                    other[q] = NEAR_MISS_WEIGHT;
                }
            }
        }
    }
    let other_total: f64 = other.iter().sum();
    if other_total > 0.0 {
        for (d, o) in dist.iter_mut().zip(&other) {
            *d += error_rate * o / other_total;
        }
    }
    let s: f64 = dist.iter().sum();
    for d in &mut dist {
        *d /= s;
    }
    Ok(dist)
}

/// Pitch distribution of every state of every factor.
pub fn build_pitch_output(layout: &[Vec<StateLayout>], error_rate: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    layout
        .iter()
        .map(|f| f.iter().map(|s| pitch_distribution(&s.pitches, error_rate)).collect())
        .collect()
}

/// The named IOI distributions used by the transition classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoiOutputs {
    pub chord: DistSpec,
    pub short_app: DistSpec,
    pub arpeggio: DistSpec,
    pub trill: DistSpec,
    pub skip: DistSpec,
    pub insertion: DistSpec,
    pub prediction_noise: DistSpec,
}

impl IoiOutputs {
    pub fn from_params(p: &IoiParams) -> Result<Self> {
        Ok(IoiOutputs {
            chord: p.require("chord")?,
            short_app: p.require("short_app")?,
            arpeggio: p.require("arpeggio")?,
            trill: p.require("trill")?,
            skip: p.require("skip")?,
            insertion: p.require("insertion")?,
            prediction_noise: p.require("prediction_noise")?,
        })
    }

    fn spec(&self, label: IoiLabel) -> DistSpec {
        match label {
            IoiLabel::Chord => self.chord,
            IoiLabel::ShortApp => self.short_app,
            IoiLabel::Arpeggio => self.arpeggio,
            IoiLabel::Trill => self.trill,
        }
    }
}

/// Self-transition IOI mixture with weights proportional to the succession counts.
pub fn self_ioi_mixture(state_type: StateType, succ: &Successions, out: &IoiOutputs) -> IoiMixture {
    let weights = [
        (IoiLabel::Chord, succ.chord),
        (IoiLabel::ShortApp, succ.short_app),
        (IoiLabel::Arpeggio, succ.arpeggio),
        (IoiLabel::Trill, succ.trill),
    ];
    let components: Vec<IoiComponent> = weights
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|&(label, weight)| IoiComponent {
            label,
            weight,
            spec: out.spec(label),
        })
        .collect();
    if components.is_empty() {
        let label = match state_type {
            StateType::Ch => IoiLabel::Chord,
            StateType::Sa => IoiLabel::ShortApp,
            StateType::Tr => IoiLabel::Trill,
        };
        return IoiMixture::single(label, out.spec(label));
    }
    IoiMixture::new(components).expect("positive weights of valid specs")
}

/// Self-transition mixtures of every state of every factor.
pub fn build_ioi_output(layout: &[Vec<StateLayout>], params: &IoiParams) -> Result<Vec<Vec<IoiMixture>>> {
    let out = IoiOutputs::from_params(params)?;
    Ok(layout
        .iter()
        .map(|f| f.iter().map(|s| self_ioi_mixture(s.state_type, &s.successions, &out)).collect())
        .collect())
}

/// Cauchy density restricted to non-negative intervals.
pub fn truncated_cauchy_pdf(x: f64, location: f64, width: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let z = (x - location) / width;
    let mass = 0.5 + (location / width).atan() / PI;
    1.0 / (PI * width * (1.0 + z * z)) / mass
}

pub fn floored_ln(density: f64) -> f64 {
    density.max(DENSITY_FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ioi::default_params;

    fn p(m: i32) -> Pitch {
        Pitch::new(m).unwrap()
    }

    #[test]
    fn clean_chord_is_uniform() {
        let d = pitch_distribution(&[(p(60), 1.0), (p(64), 1.0), (p(67), 1.0)], 0.0).unwrap();
        for m in [60, 64, 67] {
            assert!((d[m] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(d.iter().filter(|x| **x > 0.0).count(), 3);
    }

    #[test]
    fn error_mass_and_near_misses() {
        let d = pitch_distribution(&[(p(60), 1.0)], 0.01).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((1.0 - d[60] - 0.01).abs() < 1e-12);
        assert!((d[61] / d[63] - 10.0).abs() < 1e-9);
        assert!(pitch_distribution(&[(p(60), 1.0)], 0.3).is_err());
    }

    #[test]
    fn mixture_weights_follow_successions() {
        let out = IoiOutputs::from_params(&default_params()).unwrap();
        let one_note = Successions {
            trill: 2.0,
            ..Successions::default()
        };
        assert_eq!(self_ioi_mixture(StateType::Tr, &one_note, &out).weight(IoiLabel::Chord), 0.0);
        let tri = Successions {
            chord: 4.0,
            trill: 2.0,
            ..Successions::default()
        };
        let m = self_ioi_mixture(StateType::Tr, &tri, &out);
        assert!((m.weight(IoiLabel::Chord) / m.weight(IoiLabel::Trill) - 2.0).abs() < 1e-12);
        let single = self_ioi_mixture(StateType::Sa, &Successions::default(), &out);
        assert_eq!(single.weight(IoiLabel::ShortApp), 1.0);
    }

    #[test]
    fn truncated_cauchy_integrates_to_one() {
        let (loc, w) = (0.25, 0.3);
        // Substitution x = tan(u) maps [0, inf) to [0, pi/2).
        let n = 200_000;
        let h = (PI / 2.0) / n as f64;
        let s: f64 = (0..n)
            .map(|k| {
                let u = (k as f64 + 0.5) * h;
                truncated_cauchy_pdf(u.tan(), loc, w) / u.cos().powi(2) * h
            })
            .sum();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }
}
