//! Synthetic performances sampled from a compiled model, with ground-truth alignments.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ioi::{DistSpec, IoiParams};
use crate::matcher::{AlignedNote, Alignment, NoteEvent};
use crate::model::{IoiOutputs, PerformanceHmm, Spread, StateType, TransitionClass};
use crate::score::{Pitch, Ticks};
use crate::tempo::{TempoRow, TempoTrack};

const RATES_TAG: &str = "# sim-rates v1";
const START_TIME: f64 = 1.0;

/// A jump taken the first time the performer finishes event `after`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledJump {
    pub after: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub pitch_error: f64,
    pub insertion: f64,
    pub deletion: f64,
    /// Probability of a random repeat or skip after each event.
    pub repeat_skip: f64,
    /// Largest backward jump, in events.
    pub max_repeat: usize,
    /// Largest forward skip, in events.
    pub max_skip: usize,
    /// Tempo random-walk deviation (dimensionless).
    pub sigma_v: f64,
    /// Relative deviation of the trill period between trills.
    pub trill_jitter: f64,
    pub trill_period: f64,
    /// Performed tempo in seconds per tick; the model's reference tempo when unset.
    pub tempo: Option<f64>,
    pub ioi: IoiParams,
    pub jumps: Vec<ScheduledJump>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            pitch_error: 0.01,
            insertion: 0.01,
            deletion: 0.01,
            repeat_skip: 0.005,
            max_repeat: 16,
            max_skip: 8,
            sigma_v: 0.03,
            trill_jitter: 0.1,
            trill_period: 0.17,
            tempo: None,
            ioi: crate::ioi::default_params(),
            jumps: Vec::new(),
        }
    }
}

impl SimConfig {
    /// Error-free performance with a steady tempo.
    pub fn clean(seed: u64) -> Self {
        SimConfig {
            seed,
            pitch_error: 0.0,
            insertion: 0.0,
            deletion: 0.0,
            repeat_skip: 0.0,
            sigma_v: 0.0,
            ..SimConfig::default()
        }
    }

    /// Same configuration with every mistake rate multiplied by `k`.
    pub fn scaled_mistakes(&self, k: f64) -> Self {
        SimConfig {
            pitch_error: (self.pitch_error * k).min(1.0),
            insertion: (self.insertion * k).min(1.0),
            deletion: (self.deletion * k).min(1.0),
            repeat_skip: (self.repeat_skip * k).min(1.0),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("pitch_error", self.pitch_error),
            ("insertion", self.insertion),
            ("deletion", self.deletion),
            ("repeat_skip", self.repeat_skip),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::input(format!("{name} rate {r} outside [0, 1]")));
            }
        }
        if !(self.sigma_v >= 0.0 && self.trill_jitter >= 0.0 && self.trill_period > 0.0) {
            return Err(Error::input("tempo and trill parameters must be non-negative"));
        }
        if let Some(v) = self.tempo {
            if !(v > 0.0) {
                return Err(Error::input("tempo must be positive"));
            }
        }
        if self.max_repeat == 0 || self.max_skip < 2 {
            return Err(Error::input("jump spans too small"));
        }
        Ok(())
    }

    /// Overlays `key value` lines onto the configuration.
    pub fn apply_rates(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(key), Some(value), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(n + 1, format!("expected `key value`, found `{line}`")));
            };
            let num = || value.parse::<f64>().map_err(|_| Error::parse(n + 1, format!("bad number `{value}`")));
            let int = || value.parse::<usize>().map_err(|_| Error::parse(n + 1, format!("bad integer `{value}`")));
            match key {
                "pitch_error" => self.pitch_error = num()?,
                "insertion" => self.insertion = num()?,
                "deletion" => self.deletion = num()?,
                "repeat_skip" => self.repeat_skip = num()?,
                "max_repeat" => self.max_repeat = int()?,
                "max_skip" => self.max_skip = int()?,
                "sigma_v" => self.sigma_v = num()?,
                "trill_jitter" => self.trill_jitter = num()?,
                "trill_period" => self.trill_period = num()?,
                "tempo_bpm" => self.tempo = Some(num()?),
                _ => return Err(Error::parse(n + 1, format!("unknown key `{key}`"))),
            }
        }
        self.validate()
    }

    pub fn rates_text(&self) -> String {
        let mut out = format!("{RATES_TAG}\n");
        for (k, v) in [
            ("pitch_error", self.pitch_error),
            ("insertion", self.insertion),
            ("deletion", self.deletion),
            ("repeat_skip", self.repeat_skip),
            ("max_repeat", self.max_repeat as f64),
            ("max_skip", self.max_skip as f64),
            ("sigma_v", self.sigma_v),
            ("trill_jitter", self.trill_jitter),
            ("trill_period", self.trill_period),
        ] {
            let _ = writeln!(out, "{k} {v}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub events: Vec<NoteEvent>,
    pub truth: Alignment,
    pub tempo: TempoTrack,
}

#[derive(Serialize, Deserialize)]
struct StreamLine {
    t: f64,
    pitch: u8,
}

/// JSON-lines stream, one `{"t": seconds, "pitch": midi}` object per note.
pub fn stream_to_json_lines(events: &[NoteEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let line = StreamLine {
            t: e.onset,
            pitch: e.pitch.midi(),
        };
        out.push_str(&serde_json::to_string(&line).expect("plain struct serializes"));
        out.push('\n');
    }
    out
}

pub fn stream_from_json_lines(text: &str) -> Result<Vec<NoteEvent>> {
    let mut events = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: StreamLine = serde_json::from_str(line).map_err(|e| Error::parse(n + 1, e.to_string()))?;
        let pitch = Pitch::new(i32::from(l.pitch)).map_err(|_| Error::parse(n + 1, "pitch out of range"))?;
        events.push(NoteEvent::new(events.len(), l.t, pitch));
    }
    Ok(events)
}

struct Walker<'a> {
    hmm: &'a PerformanceHmm,
    cfg: &'a SimConfig,
    ioi: IoiOutputs,
    rng: ChaCha8Rng,
    time: f64,
    tempo: f64,
    prev: Option<usize>,
    events: Vec<NoteEvent>,
    truth: Vec<AlignedNote>,
}

impl Walker<'_> {
    fn draw(&mut self, spec: DistSpec) -> f64 {
        spec.sample(&mut self.rng).max(0.0)
    }

    fn wrong_pitch(&mut self, p: Pitch) -> Pitch {
        for _ in 0..8 {
            let d = *[-12, -2, -1, 1, 2, 12].choose(&mut self.rng).expect("non-empty");
            if let Some(q) = p.offset(d) {
                return q;
            }
        }
        p
    }

    /// IOI leading into a note of state `j` when the previous note is in another state.
    fn entry_ioi(&mut self, j: usize, jumped: bool) -> (f64, TransitionClass) {
        let Some(i) = self.prev else {
            return (0.0, TransitionClass::Initial);
        };
        let (si, sj) = (&self.hmm.states[i], &self.hmm.states[j]);
        if jumped {
            return (self.draw(self.hmm.skip_spec(self.ioi.skip.floor.unwrap_or(0.0))), TransitionClass::Skip);
        }
        if si.top == sj.top {
            return (self.draw(self.ioi.short_app), TransitionClass::Immediate);
        }
        let ticks = sj.score_time as f64 - si.end_time as f64;
        if ticks <= 0.0 {
            return (self.draw(self.ioi.short_app), TransitionClass::Immediate);
        }
        let mean = self.tempo * ticks + sj.onset_offset - si.release_offset;
        let noise = self.ioi.prediction_noise;
        for _ in 0..100 {
            let dt = mean + noise.sample(&mut self.rng) - noise.location;
            if dt >= 0.0 {
                return (dt, TransitionClass::Metric);
            }
        }
        (mean.max(0.0), TransitionClass::Metric)
    }

    /// States an inserted note in state `j` may reasonably be matched to.
    fn insertion_candidates(&self, j: usize) -> Vec<(usize, usize)> {
        let top = self.hmm.states[j].top;
        let mut c: Vec<(usize, usize)> = (0..self.hmm.tops[top].len).map(|k| (top, k)).collect();
        if top + 1 < self.hmm.top_count() {
            c.push((top + 1, 0));
        }
        c
    }

    fn emit(&mut self, j: usize, pitch: Pitch, dt: f64, class: TransitionClass, candidates: Vec<(usize, usize)>) {
        self.time += dt;
        let s = &self.hmm.states[j];
        let m = self.events.len();
        self.events.push(NoteEvent::new(m, self.time, pitch));
        self.truth.push(AlignedNote {
            m,
            onset: self.time,
            pitch,
            top: s.top,
            sub: s.sub,
            state_type: s.state_type,
            score_time: s.score_time,
            class,
            log_odds: 0.0,
            candidates,
        });
        self.prev = Some(j);
    }

    /// Plays one scheduled note, applying deletion, pitch-error and insertion mistakes.
    /// Returns whether the note sounded.
    fn play(&mut self, j: usize, pitch: Pitch, self_dt: Option<f64>, jumped: bool) -> bool {
        if self.rng.gen::<f64>() < self.cfg.deletion {
            return false;
        }
        let pitch = if self.rng.gen::<f64>() < self.cfg.pitch_error {
            self.wrong_pitch(pitch)
        } else {
            pitch
        };
        let (dt, class) = match (self.prev, self_dt) {
            (Some(i), Some(dt)) if i == j => (dt, TransitionClass::SelfLoop),
            _ => self.entry_ioi(j, jumped),
        };
        self.emit(j, pitch, dt, class, Vec::new());
        if self.rng.gen::<f64>() < self.cfg.insertion {
            let extra = self.wrong_pitch(pitch);
            let dt = self.hmm.states[j].self_ioi.sample(&mut self.rng).max(0.0);
            let candidates = self.insertion_candidates(j);
            self.emit(j, extra, dt, TransitionClass::SelfLoop, candidates);
        }
        true
    }

    /// Plays every note of state `j`; `jumped` marks the first note as following a jump.
    fn play_state(&mut self, j: usize, mut jumped: bool) -> bool {
        let layout = self.hmm.states[j].layout.clone();
        let mut sounded = false;
        for (g, group) in layout.emission.iter().enumerate() {
            let mut pitches = group.pitches.clone();
            if group.spread == Spread::Chord {
                pitches.shuffle(&mut self.rng);
            }
            for (n, &p) in pitches.iter().enumerate() {
                let spec = match (n, group.spread) {
                    (0, _) if g == 0 => None,
                    (0, _) if group.simultaneous => Some(self.ioi.chord),
                    (0, _) => Some(self.ioi.short_app),
                    (_, Spread::Chord) => Some(self.ioi.chord),
                    (_, Spread::Arpeggio) => Some(self.ioi.arpeggio),
                };
                let dt = spec.map(|s| self.draw(s));
                if self.play(j, p, dt, jumped) {
                    sounded = true;
                    jumped = false;
                }
            }
        }
        if layout.state_type == StateType::Tr {
            let s = &self.hmm.states[j];
            let trill = s.trill.expect("trill state has trill parameters");
            let jitter: f64 = StandardNormal.sample(&mut self.rng);
            let period = self.cfg.trill_period * (1.0 + self.cfg.trill_jitter * jitter).max(0.3);
            let count = (trill.notes_per_repetition * self.tempo * trill.value as f64 / period).round().max(1.0) as usize;
            let mut played = 0;
            'outer: for r in 0.. {
                let chord = layout.cycle[r % layout.cycle.len()].clone();
                let mut pitches = chord;
                pitches.shuffle(&mut self.rng);
                for (n, &p) in pitches.iter().enumerate() {
                    if played == count {
                        break 'outer;
                    }
                    let spec = if n == 0 { self.ioi.trill } else { self.ioi.chord };
                    let dt = self.draw(spec);
                    if self.play(j, p, Some(dt), jumped) {
                        sounded = true;
                        jumped = false;
                    }
                    played += 1;
                }
            }
        }
        sounded
    }
}

/// Samples a performance of the whole score.
pub fn simulate(hmm: &PerformanceHmm, cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let v0 = cfg.tempo.unwrap_or(hmm.reference_tempo);
    let mut w = Walker {
        hmm,
        cfg,
        ioi: IoiOutputs::from_params(&cfg.ioi)?,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        time: START_TIME,
        tempo: v0,
        prev: None,
        events: Vec::new(),
        truth: Vec::new(),
    };
    let n = hmm.top_count();
    let mut track = TempoTrack::default();
    let mut pending: Vec<ScheduledJump> = cfg.jumps.clone();
    let mut top = 0usize;
    let mut jumped = false;
    let mut prev_top: Option<usize> = None;
    let mut guard = 0usize;
    while top < n {
        guard += 1;
        if guard > 50 * n + 1000 {
            return Err(Error::input("simulation did not terminate; jump schedule loops"));
        }
        if let Some(p) = prev_top {
            if !jumped && top > p {
                let nu = (hmm.tops[top].score_time - hmm.tops[p].score_time) as f64;
                let eps: f64 = StandardNormal.sample(&mut w.rng);
                let step = nu * v0 / hmm.ticks_per_quarter as f64 * cfg.sigma_v * eps;
                w.tempo = (w.tempo + step).clamp(v0 / 4.0, 4.0 * v0);
                track.rows.push(TempoRow {
                    step: track.rows.len() + 1,
                    time: w.time,
                    nu: nu as Ticks,
                    tempo: w.tempo,
                    regime: 1.0,
                });
            }
        }
        let t = hmm.tops[top];
        for j in t.first_state..t.first_state + t.len {
            if w.play_state(j, jumped) {
                jumped = false;
            }
        }
        prev_top = Some(top);
        if let Some(k) = pending.iter().position(|s| s.after == top) {
            let s = pending.remove(k);
            top = s.to.min(n - 1);
            jumped = true;
            continue;
        }
        if cfg.repeat_skip > 0.0 && w.rng.gen::<f64>() < cfg.repeat_skip {
            let target = if w.rng.gen_bool(0.5) {
                top.saturating_sub(w.rng.gen_range(1..=cfg.max_repeat))
            } else {
                top + w.rng.gen_range(2..=cfg.max_skip)
            };
            if target < n {
                top = target;
                jumped = true;
                continue;
            }
        }
        top += 1;
    }
    if w.events.is_empty() {
        return Err(Error::input("simulation produced no notes"));
    }
    Ok(Simulation {
        events: w.events,
        truth: Alignment { notes: w.truth },
        tempo: track,
    })
}
