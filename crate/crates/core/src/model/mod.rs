//! Compilation of a homophonized score into the expanded two-level performance HMM.

mod equivalence;
mod hierarchy;
mod output;
mod segment;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homophonize::{homophonize, HomophonizedSequence};
use crate::ioi::{default_params, DistSpec, IoiMixture, IoiParams};
use crate::score::{Pitch, PolyphonicScore, Ticks};

pub use equivalence::{loglik_equivalence_check, TimedModel};
pub use hierarchy::{
    expand_hierarchical, self_transition_from_expected, trill_expected_notes, BottomParams, TopKernel, TopRow,
};
pub use output::{
    build_ioi_output, build_pitch_output, floored_ln, pitch_distribution, self_ioi_mixture, truncated_cauchy_pdf,
    IoiOutputs, DENSITY_FLOOR, PITCHES,
};
pub use segment::{segment_events, segment_factor, EmissionGroup, Shift, Spread, StateLayout, Successions};

const MAGIC: &[u8; 8] = b"SCALHMM\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateType {
    /// Chord-like state with a metrical duration.
    Ch,
    /// State succeeded immediately by the next one.
    Sa,
    /// Trill or tremolo continuation.
    Tr,
}

impl StateType {
    pub fn name(self) -> &'static str {
        match self {
            StateType::Ch => "CH",
            StateType::Sa => "SA",
            StateType::Tr => "TR",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "CH" => Some(StateType::Ch),
            "SA" => Some(StateType::Sa),
            "TR" => Some(StateType::Tr),
            _ => None,
        }
    }
}

/// How the IOI preceding a note is explained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionClass {
    Initial,
    SelfLoop,
    Immediate,
    Metric,
    Insertion,
    Skip,
}

impl TransitionClass {
    pub const ALL: [TransitionClass; 6] = [
        TransitionClass::Initial,
        TransitionClass::SelfLoop,
        TransitionClass::Immediate,
        TransitionClass::Metric,
        TransitionClass::Insertion,
        TransitionClass::Skip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransitionClass::Initial => "initial",
            TransitionClass::SelfLoop => "self",
            TransitionClass::Immediate => "immediate",
            TransitionClass::Metric => "metric",
            TransitionClass::Insertion => "insertion",
            TransitionClass::Skip => "skip",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Allowance for inserted and deleted notes added to every expected note count.
    pub epsilon_e: f64,
    pub pitch_error: f64,
    /// Mean duration of one trill or tremolo repetition, seconds.
    pub trill_period: f64,
    pub kernel: TopKernel,
    pub ioi: IoiParams,
    /// Factor applied to the predicted IOI and its width after a fermata.
    pub fermata_stretch: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            epsilon_e: 0.1,
            pitch_error: 0.01,
            trill_period: 0.17,
            kernel: TopKernel::default(),
            ioi: default_params(),
            fermata_stretch: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrillParams {
    pub notes_per_repetition: f64,
    /// Seconds per repetition.
    pub period: f64,
    pub value: Ticks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BottomState {
    pub top: usize,
    pub sub: usize,
    pub state_type: StateType,
    pub pitch_dist: Vec<f64>,
    pub self_ioi: IoiMixture,
    pub expected_notes: f64,
    pub self_prob: f64,
    pub note_value: Option<Ticks>,
    pub trill: Option<TrillParams>,
    pub score_time: Ticks,
    pub end_time: Ticks,
    /// Expected lead of the first note relative to the factor's score time, seconds.
    pub onset_offset: f64,
    /// Expected lead of the last note relative to `end_time`, seconds.
    pub release_offset: f64,
    pub layout: StateLayout,
}

impl BottomState {
    pub fn main_pitches(&self) -> Vec<Pitch> {
        self.layout.main_pitches()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopEvent {
    pub first_state: usize,
    pub len: usize,
    pub score_time: Ticks,
    pub end_time: Ticks,
    pub fermata: bool,
}

/// IOI model of one transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IoiTerm<'a> {
    SelfLoop(&'a IoiMixture),
    Immediate,
    /// Predicted from the tempo: `tempo * ticks + deviation` seconds.
    Metric { ticks: f64, deviation: f64, stretch: f64 },
    Insertion,
    Skip,
}

/// Runtime parameters of one likelihood evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepParams {
    pub gamma_bar: f64,
    /// Width of the predicted-IOI Cauchy density, seconds.
    pub delta: f64,
    /// Seconds per tick.
    pub tempo: f64,
    /// Lower support end of the skip and insertion densities, seconds.
    pub skip_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceHmm {
    pub states: Vec<BottomState>,
    pub tops: Vec<TopEvent>,
    pub bottoms: Vec<BottomParams>,
    pub kernel: TopKernel,
    pub ioi: IoiOutputs,
    /// Initial tempo, seconds per tick.
    pub reference_tempo: f64,
    pub ticks_per_quarter: u32,
    pub config: ModelConfig,
}

impl PerformanceHmm {
    /// Homophonizes and compiles a score.
    pub fn compile(score: &PolyphonicScore, config: &ModelConfig) -> Result<Self> {
        let seq = homophonize(score)?;
        Self::build(&seq, score.reference_tempo(), config)
    }

    pub fn build(seq: &HomophonizedSequence, reference_tempo: f64, config: &ModelConfig) -> Result<Self> {
        if !(reference_tempo > 0.0) || !reference_tempo.is_finite() {
            return Err(Error::InvalidModel(format!("reference tempo {reference_tempo} must be positive")));
        }
        if !(config.epsilon_e >= 0.0) || !(config.trill_period > 0.0) || !(config.fermata_stretch > 0.0) {
            return Err(Error::InvalidModel("model constants must be positive".into()));
        }
        config.kernel.validate()?;
        if seq.factors.is_empty() {
            return Err(Error::InvalidModel("no events to compile".into()));
        }
        let ioi = IoiOutputs::from_params(&config.ioi)?;
        let (m_short, m_arp, m_trill) = (ioi.short_app.median(), ioi.arpeggio.median(), ioi.trill.median());
        let seconds = |s: &Shift| s.short_app * m_short + s.arpeggio * m_arp + s.trill * m_trill;

        let layouts = segment_events(seq);
        let pitch = build_pitch_output(&layouts, config.pitch_error)?;
        let mut states = Vec::new();
        let mut tops = Vec::with_capacity(layouts.len());
        let mut bottoms = Vec::with_capacity(layouts.len());
        for (t, (f, subs)) in seq.factors.iter().zip(&layouts).enumerate() {
            if subs.is_empty() {
                return Err(Error::InvalidModel(format!("factor {t} yields no states")));
            }
            let first_state = states.len();
            let mut self_probs = Vec::with_capacity(subs.len());
            for (k, l) in subs.iter().enumerate() {
                let (expected, trill) = match l.state_type {
                    StateType::Tr => {
                        let n_bar = l.notes_per_repetition() as f64;
                        let n = trill_expected_notes(n_bar, reference_tempo, l.note_value as f64, config.trill_period)?;
                        let tp = TrillParams {
                            notes_per_repetition: n_bar,
                            period: config.trill_period,
                            value: l.note_value,
                        };
                        (n, Some(tp))
                    }
                    _ => (l.notes() as f64, None),
                };
                let expected_notes = (expected + config.epsilon_e).max(1.0);
                let self_prob = self_transition_from_expected(expected_notes)?;
                self_probs.push(self_prob);
                states.push(BottomState {
                    top: t,
                    sub: k,
                    state_type: l.state_type,
                    pitch_dist: pitch[t][k].clone(),
                    self_ioi: self_ioi_mixture(l.state_type, &l.successions, &ioi),
                    expected_notes,
                    self_prob,
                    note_value: (l.state_type == StateType::Ch).then_some(l.note_value),
                    trill,
                    score_time: f.score_time,
                    end_time: l.end_time,
                    onset_offset: seconds(&l.onset_shift),
                    release_offset: seconds(&l.release_shift),
                    layout: l.clone(),
                });
            }
            tops.push(TopEvent {
                first_state,
                len: subs.len(),
                score_time: f.score_time,
                end_time: f.end_time,
                fermata: f.fermata,
            });
            bottoms.push(BottomParams::chain(&self_probs));
        }
        Ok(PerformanceHmm {
            states,
            tops,
            bottoms,
            kernel: config.kernel,
            ioi,
            reference_tempo,
            ticks_per_quarter: seq.ticks_per_quarter,
            config: config.clone(),
        })
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn top_count(&self) -> usize {
        self.tops.len()
    }

    pub fn state_index(&self, top: usize, sub: usize) -> Option<usize> {
        let t = self.tops.get(top)?;
        (sub < t.len).then_some(t.first_state + sub)
    }

    /// Expanded transition probability under skip mass `gamma_bar`.
    pub fn transition(&self, i: usize, j: usize, gamma_bar: f64) -> f64 {
        let (si, sj) = (&self.states[i], &self.states[j]);
        let (bi, bj) = (&self.bottoms[si.top], &self.bottoms[sj.top]);
        let a = self.kernel.with_gamma(gamma_bar).prob(si.top, sj.top, self.tops.len());
        let mut p = bi.rho_out[si.sub] * a * bj.rho_in[sj.sub];
        if si.top == sj.top {
            p += bi.at(si.sub, sj.sub);
        }
        p
    }

    pub fn initial(&self, j: usize, gamma_bar: f64) -> f64 {
        let s = &self.states[j];
        let row = self.kernel.with_gamma(gamma_bar).initial_row(self.tops.len());
        row.prob(s.top) * self.bottoms[s.top].rho_in[s.sub]
    }

    /// Predicted IOI term for a move between different events `I -> J` with `0 < J - I <= 4`.
    fn forward_term(&self, i: usize, j: usize) -> IoiTerm<'_> {
        let (si, sj) = (&self.states[i], &self.states[j]);
        let ticks = sj.score_time as f64 - si.end_time as f64;
        if ticks <= 0.0 {
            return IoiTerm::Immediate;
        }
        let stretch = if self.tops[si.top].fermata {
            self.config.fermata_stretch
        } else {
            1.0
        };
        IoiTerm::Metric {
            ticks,
            deviation: sj.onset_offset - si.release_offset,
            stretch,
        }
    }

    /// IOI terms of a transition with their probabilities; two terms when both
    /// states belong to one event.
    pub fn transition_terms(&self, i: usize, j: usize, gamma_bar: f64) -> Vec<(f64, TransitionClass, IoiTerm<'_>)> {
        let (si, sj) = (&self.states[i], &self.states[j]);
        let n = self.tops.len();
        let a = self.kernel.with_gamma(gamma_bar).prob(si.top, sj.top, n);
        let (bi, bj) = (&self.bottoms[si.top], &self.bottoms[sj.top]);
        let outer = bi.rho_out[si.sub] * a * bj.rho_in[sj.sub];
        if si.top == sj.top {
            let inner = bi.at(si.sub, sj.sub);
            let mut v = Vec::with_capacity(2);
            if sj.sub == si.sub {
                v.push((inner, TransitionClass::SelfLoop, IoiTerm::SelfLoop(&sj.self_ioi)));
            } else if sj.sub > si.sub {
                v.push((inner, TransitionClass::Immediate, IoiTerm::Immediate));
            }
            v.push((outer, TransitionClass::Insertion, IoiTerm::Insertion));
            return v;
        }
        let d = sj.top as i64 - si.top as i64;
        if (1..=TopKernel::MAX_FORWARD as i64).contains(&d) {
            let term = self.forward_term(i, j);
            let class = match term {
                IoiTerm::Immediate => TransitionClass::Immediate,
                _ => TransitionClass::Metric,
            };
            vec![(outer, class, term)]
        } else {
            vec![(outer, TransitionClass::Skip, IoiTerm::Skip)]
        }
    }

    /// Density of an IOI under one term.
    pub fn ioi_density(&self, term: &IoiTerm<'_>, dt: f64, p: &StepParams) -> f64 {
        match term {
            IoiTerm::SelfLoop(m) => m.pdf(dt),
            IoiTerm::Immediate => self.ioi.short_app.pdf(dt),
            IoiTerm::Metric {
                ticks,
                deviation,
                stretch,
            } => truncated_cauchy_pdf(dt, (p.tempo * ticks + deviation) * stretch, p.delta * stretch),
            IoiTerm::Insertion => self.insertion_spec(p.skip_floor).pdf(dt),
            IoiTerm::Skip => self.skip_spec(p.skip_floor).pdf(dt),
        }
    }

    pub fn skip_spec(&self, floor: f64) -> DistSpec {
        DistSpec {
            floor: Some(floor),
            ..self.ioi.skip
        }
    }

    pub fn insertion_spec(&self, floor: f64) -> DistSpec {
        DistSpec {
            floor: Some(floor),
            ..self.ioi.insertion
        }
    }

    pub fn log_pitch(&self, j: usize, pitch: Pitch) -> f64 {
        self.states[j].pitch_dist[pitch.midi() as usize].ln()
    }

    /// `ln a_ij + ln b_ij(pitch, dt)` and the dominant class; `i = None` is the initial step.
    pub fn log_joint_step(&self, i: Option<usize>, j: usize, pitch: Pitch, dt: f64, p: &StepParams) -> (f64, TransitionClass) {
        let lp = self.log_pitch(j, pitch);
        let Some(i) = i else {
            return (self.initial(j, p.gamma_bar).ln() + lp, TransitionClass::Initial);
        };
        let mut best = (f64::NEG_INFINITY, TransitionClass::Skip);
        let mut terms = Vec::with_capacity(2);
        for (a, class, term) in self.transition_terms(i, j, p.gamma_bar) {
            let l = a.ln() + floored_ln(self.ioi_density(&term, dt, p));
            if l > best.0 {
                best = (l, class);
            }
            terms.push(l);
        }
        (log_sum_exp(&terms) + lp, best.1)
    }

    /// Writes the model in a versioned binary format.
    pub fn save(&self) -> Result<Vec<u8>> {
        let mut out = MAGIC.to_vec();
        out.extend(FORMAT_VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, self).map_err(|e| Error::InvalidModel(e.to_string()))?;
        Ok(out)
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(Error::InvalidModel("not a compiled model".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::InvalidModel(format!("model format version {version}, expected {FORMAT_VERSION}")));
        }
        bincode::deserialize(&bytes[12..]).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    /// One line per state: `state top sub type score_time end_time n_e self_prob pitches`.
    pub fn state_table(&self) -> String {
        let mut out = String::from("state\ttop\tsub\ttype\tscore_time\tend_time\tn_e\tself_prob\tpitches\n");
        for (j, s) in self.states.iter().enumerate() {
            let pitches: Vec<String> = s.main_pitches().iter().map(|p| p.midi().to_string()).collect();
            let _ = writeln!(
                out,
                "{j}\t{}\t{}\t{}\t{}\t{}\t{:.4}\t{:.6}\t{}",
                s.top,
                s.sub,
                s.state_type.name(),
                s.score_time,
                s.end_time,
                s.expected_notes,
                s.self_prob,
                pitches.join(",")
            );
        }
        out
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
