//! Online and offline Viterbi decoding coupled to the tempo tracker.

mod alignment;
mod lattice;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PerformanceHmm, StepParams, TransitionClass};
use crate::score::{Pitch, Ticks};
use crate::tempo::{TempoParams, TempoRow, TempoState, TempoTrack};

pub use alignment::{AlignedNote, Alignment};
use lattice::Lattice;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Online,
    Offline,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub mode: Mode,
    /// Total probability of jumps outside the event neighbourhood.
    pub gamma_bar: f64,
    /// Width of the predicted-IOI density, seconds.
    pub delta: f64,
    /// IOIs below this many seconds are nearly impossible for skips and insertions.
    pub skip_floor: f64,
}

impl MatcherConfig {
    pub fn online() -> Self {
        MatcherConfig {
            mode: Mode::Online,
            gamma_bar: (-20.0f64).exp(),
            delta: 0.4,
            skip_floor: 0.3,
        }
    }

    pub fn offline() -> Self {
        MatcherConfig {
            mode: Mode::Offline,
            gamma_bar: (-40.0f64).exp(),
            delta: 0.3,
            skip_floor: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_bar > 0.0 && self.gamma_bar < 1.0) {
            return Err(Error::input(format!("gamma_bar {} outside (0, 1)", self.gamma_bar)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::input(format!("delta {} must be positive", self.delta)));
        }
        if !(self.skip_floor >= 0.0) || !self.skip_floor.is_finite() {
            return Err(Error::input("skip floor must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: Pitch,
    /// Seconds.
    pub onset: f64,
    pub index: usize,
}

impl NoteEvent {
    pub fn new(index: usize, onset: f64, pitch: Pitch) -> Self {
        NoteEvent { pitch, onset, index }
    }
}

/// Estimated position after one note.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnlineEstimate {
    pub state: usize,
    pub top: usize,
    pub sub: usize,
    pub score_time: Ticks,
    /// Seconds per tick.
    pub tempo: f64,
    /// Score gap between the best and second-best state.
    pub log_odds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub alignment: Alignment,
    pub tempo: TempoTrack,
    /// Log-probability of the returned path (offline) or of the last column's best state (online).
    pub log_prob: f64,
    /// Tempo used for each note's likelihood.
    pub tempo_used: Vec<f64>,
    /// State index per note.
    pub path: Vec<usize>,
}

struct Emitted {
    state: usize,
    class: TransitionClass,
    log_odds: f64,
}

/// Incremental decoder over one performance.
pub struct Session<'a> {
    hmm: &'a PerformanceHmm,
    config: MatcherConfig,
    tempo_params: TempoParams,
    lattice: Lattice,
    delta: Vec<f64>,
    next: Vec<f64>,
    back: Vec<u32>,
    backpointers: Vec<Vec<u32>>,
    log_offset: f64,
    notes: Vec<NoteEvent>,
    tempo: TempoState,
    track: TempoTrack,
    tempo_used: Vec<f64>,
    emitted: Vec<Emitted>,
    current: Option<(usize, f64)>,
    last_nu: Option<f64>,
}

impl<'a> Session<'a> {
    pub fn new(hmm: &'a PerformanceHmm, config: MatcherConfig, tempo_params: TempoParams) -> Result<Self> {
        config.validate()?;
        let tempo = TempoState::init(&tempo_params)?;
        let n = hmm.state_count();
        Ok(Session {
            hmm,
            config,
            tempo_params,
            lattice: Lattice::new(hmm, &config),
            delta: vec![f64::NEG_INFINITY; n],
            next: vec![f64::NEG_INFINITY; n],
            back: vec![0; n],
            backpointers: Vec::new(),
            log_offset: 0.0,
            notes: Vec::new(),
            tempo,
            track: TempoTrack::default(),
            tempo_used: Vec::new(),
            emitted: Vec::new(),
            current: None,
            last_nu: None,
        })
    }

    /// Session with the model's reference tempo.
    pub fn with_defaults(hmm: &'a PerformanceHmm, config: MatcherConfig) -> Result<Self> {
        Self::new(hmm, config, TempoParams::new(hmm.reference_tempo, hmm.ticks_per_quarter))
    }

    pub fn notes_fed(&self) -> usize {
        self.notes.len()
    }

    /// Latest estimate; `None` before the first note.
    pub fn current(&self) -> Option<OnlineEstimate> {
        let e = self.emitted.last()?;
        let s = &self.hmm.states[e.state];
        Some(OnlineEstimate {
            state: e.state,
            top: s.top,
            sub: s.sub,
            score_time: s.score_time,
            tempo: self.tempo.estimate(&self.tempo_params),
            log_odds: e.log_odds,
        })
    }

    pub fn step_params(&self, tempo: f64) -> StepParams {
        StepParams {
            gamma_bar: self.config.gamma_bar,
            delta: self.config.delta,
            tempo,
            skip_floor: self.config.skip_floor,
        }
    }

    pub fn feed(&mut self, ev: NoteEvent) -> Result<OnlineEstimate> {
        if !ev.onset.is_finite() {
            return Err(Error::input("onset must be finite"));
        }
        if let Some(prev) = self.notes.last() {
            if ev.onset < prev.onset {
                return Err(Error::OutOfOrder {
                    onset: ev.onset,
                    previous: prev.onset,
                });
            }
        }
        let v = self.tempo.estimate(&self.tempo_params);
        let pitch = ev.pitch.midi() as usize;
        match self.notes.last() {
            None => self.lattice.initial(pitch, &mut self.next),
            Some(prev) => {
                let dt = ev.onset - prev.onset;
                self.lattice.column(&self.delta, pitch, dt, v, &mut self.next, &mut self.back);
            }
        }
        let (best, second) = top_two(&self.next);
        if best.1 == f64::NEG_INFINITY {
            return Err(Error::InvalidModel("performed note has zero probability in every state".into()));
        }
        let shift = best.1;
        for (d, x) in self.delta.iter_mut().zip(&self.next) {
            *d = x - shift;
        }
        self.log_offset += shift;
        let class = if self.notes.is_empty() {
            TransitionClass::Initial
        } else {
            let p = self.step_params(v);
            let dt = ev.onset - self.notes.last().expect("previous note").onset;
            self.hmm
                .log_joint_step(Some(self.back[best.0] as usize), best.0, ev.pitch, dt, &p)
                .1
        };
        if self.config.mode == Mode::Offline && !self.notes.is_empty() {
            self.backpointers.push(self.back.clone());
        }
        self.tempo_used.push(v);
        self.notes.push(ev);
        self.emitted.push(Emitted {
            state: best.0,
            class,
            log_odds: best.1 - second,
        });
        self.update_tempo(best.0, ev.onset)?;
        Ok(self.current().expect("a note was fed"))
    }

    /// Steps the tempo filter when the best event moves forward within the neighbourhood,
    /// using the interval between the detected times of the two events.
    fn update_tempo(&mut self, state: usize, onset: f64) -> Result<()> {
        let s = &self.hmm.states[state];
        let detected = onset - s.onset_offset;
        let top = s.top;
        match self.current {
            Some((cur, _)) if cur == top => return Ok(()),
            Some((cur, t_cur)) if top > cur && top - cur <= crate::model::TopKernel::MAX_FORWARD => {
                let nu = self.hmm.tops[top].score_time as f64 - self.hmm.tops[cur].score_time as f64;
                let dt = detected - t_cur;
                if nu > 0.0 && dt > 0.0 {
                    let nu_prev = self.last_nu.unwrap_or(nu);
                    self.tempo = self.tempo.step(nu_prev, nu, dt, &self.tempo_params)?;
                    self.last_nu = Some(nu);
                    self.track.rows.push(TempoRow {
                        step: self.tempo.step,
                        time: onset,
                        nu: nu as Ticks,
                        tempo: self.tempo.estimate(&self.tempo_params),
                        regime: self.tempo.regime,
                    });
                }
            }
            _ => {}
        }
        self.current = Some((top, detected));
        Ok(())
    }

    fn aligned(&self, m: usize, state: usize, class: TransitionClass, log_odds: f64) -> AlignedNote {
        let s = &self.hmm.states[state];
        let ev = &self.notes[m];
        AlignedNote {
            m: ev.index,
            onset: ev.onset,
            pitch: ev.pitch,
            top: s.top,
            sub: s.sub,
            state_type: s.state_type,
            score_time: s.score_time,
            class,
            log_odds,
            candidates: Vec::new(),
        }
    }

    pub fn finalize(self) -> Result<MatchResult> {
        if self.notes.is_empty() {
            return Err(Error::input("no notes were fed"));
        }
        let path: Vec<usize> = match self.config.mode {
            Mode::Online => self.emitted.iter().map(|e| e.state).collect(),
            Mode::Offline => {
                let mut path = vec![0usize; self.notes.len()];
                let mut j = top_two(&self.delta).0 .0;
                path[self.notes.len() - 1] = j;
                for m in (1..self.notes.len()).rev() {
                    j = self.backpointers[m - 1][j] as usize;
                    path[m - 1] = j;
                }
                path
            }
        };
        let log_prob = self.log_offset;
        let notes = match self.config.mode {
            Mode::Online => self
                .emitted
                .iter()
                .enumerate()
                .map(|(m, e)| self.aligned(m, e.state, e.class, e.log_odds))
                .collect(),
            Mode::Offline => path
                .iter()
                .enumerate()
                .map(|(m, &j)| {
                    let class = if m == 0 {
                        TransitionClass::Initial
                    } else {
                        let p = self.step_params(self.tempo_used[m]);
                        let dt = self.notes[m].onset - self.notes[m - 1].onset;
                        self.hmm.log_joint_step(Some(path[m - 1]), j, self.notes[m].pitch, dt, &p).1
                    };
                    self.aligned(m, j, class, self.emitted[m].log_odds)
                })
                .collect(),
        };
        Ok(MatchResult {
            alignment: Alignment { notes },
            tempo: self.track,
            log_prob,
            tempo_used: self.tempo_used,
            path,
        })
    }
}

/// Best `(index, value)` with ties to the lowest index, and the second-best value.
fn top_two(xs: &[f64]) -> ((usize, f64), f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    for (j, &x) in xs.iter().enumerate() {
        if x > best.1 {
            second = best.1;
            best = (j, x);
        } else if x > second {
            second = x;
        }
    }
    (best, second)
}

/// Offline alignment with the model's reference tempo.
pub fn align_offline(hmm: &PerformanceHmm, events: &[NoteEvent], config: MatcherConfig) -> Result<MatchResult> {
    if events.is_empty() {
        return Err(Error::input("no performed notes"));
    }
    let mut s = Session::with_defaults(hmm, MatcherConfig {
        mode: Mode::Offline,
        ..config
    })?;
    for &e in events {
        s.feed(e)?;
    }
    s.finalize()
}

/// Runs a session in the configured mode over all events.
pub fn align(hmm: &PerformanceHmm, events: &[NoteEvent], config: MatcherConfig) -> Result<MatchResult> {
    if events.is_empty() {
        return Err(Error::input("no performed notes"));
    }
    let mut s = Session::with_defaults(hmm, config)?;
    for &e in events {
        s.feed(e)?;
    }
    s.finalize()
}
