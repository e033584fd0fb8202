use super::{Body, PolyphonicScore};
use crate::homophonize::glissando_path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    NoVoices,
    ZeroResolution,
    NonIncreasingTime,
    AllEmptyFactor,
    EmptyChord,
    ZeroValue,
    DegenerateTremolo,
    OrnamentOutsideChord,
    BadGlissando,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub voice: Option<usize>,
    pub factor: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.voice, self.factor) {
            (Some(v), Some(i)) => write!(f, "voice {v} factor {i}: {}", self.message),
            (Some(v), None) => write!(f, "voice {v}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

/// Lists invariant violations; an empty list means the score can be homophonized.
pub fn validate_score(score: &PolyphonicScore) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |kind, voice, factor, message: &str| {
        out.push(Diagnostic {
            kind,
            voice,
            factor,
            message: message.to_string(),
        })
    };
    if score.voices.is_empty() {
        push(DiagnosticKind::NoVoices, None, None, "score has no voices");
    }
    if score.ticks_per_quarter == 0 {
        push(DiagnosticKind::ZeroResolution, None, None, "ticks_per_quarter is zero");
    }
    for (v, voice) in score.voices.iter().enumerate() {
        for (i, f) in voice.factors.iter().enumerate() {
            let at = (Some(v), Some(i));
            if i > 0 && f.score_time <= voice.factors[i - 1].score_time {
                push(DiagnosticKind::NonIncreasingTime, at.0, at.1, "non-increasing score time");
            }
            if f.after.is_empty() && f.grace.is_empty() && f.body.is_none() {
                push(DiagnosticKind::AllEmptyFactor, at.0, at.1, "all-empty factor");
            }
            if f.after.chords.iter().chain(&f.grace.chords).any(|c| c.pitches.is_empty()) {
                push(DiagnosticKind::EmptyChord, at.0, at.1, "grace chord without pitches");
            }
            let Some(body) = &f.body else { continue };
            if body.value() == 0 {
                push(DiagnosticKind::ZeroValue, at.0, at.1, "body with zero note value");
            }
            match body {
                Body::Rest(_) => {}
                Body::Chord(c) => {
                    if c.pitches.is_empty() {
                        push(DiagnosticKind::EmptyChord, at.0, at.1, "chord without pitches");
                    }
                    if let Some(o) = &c.ornament {
                        if o.notes.is_empty()
                            || o.notes.iter().any(|n| !c.pitches.contains(&n.principal))
                        {
                            push(
                                DiagnosticKind::OrnamentOutsideChord,
                                at.0,
                                at.1,
                                "ornament principal not in chord",
                            );
                        }
                    }
                }
                Body::Tremolo(t) => {
                    if t.chords.len() < 2 || t.chords.iter().any(Vec::is_empty) {
                        push(
                            DiagnosticKind::DegenerateTremolo,
                            at.0,
                            at.1,
                            "tremolo needs two or more non-empty chords",
                        );
                    }
                }
                Body::Glissando(g) => {
                    if let Err(e) = glissando_path(g) {
                        push(DiagnosticKind::BadGlissando, at.0, at.1, &e.to_string());
                    }
                }
            }
        }
    }
    out
}
