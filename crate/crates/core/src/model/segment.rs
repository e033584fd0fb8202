//! Division of composite factors into bottom-level states.

use serde::{Deserialize, Serialize};

use super::StateType;
use crate::homophonize::{trill_part, CompositeFactor, HomophonizedSequence};
use crate::score::{ArpeggioDirection, Body, GraceGroup, Pitch, Ticks};

/// Order in which the notes of one emission group are played.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Spread {
    /// Nearly simultaneous, any order.
    Chord,
    /// Rolled in the listed order.
    Arpeggio,
}

/// Notes a state emits together in a straight performance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionGroup {
    pub pitches: Vec<Pitch>,
    pub spread: Spread,
    /// Sounds with the previous group rather than after it.
    pub simultaneous: bool,
}

/// Counts of note successions inside a state, by IOI class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Successions {
    pub chord: f64,
    pub short_app: f64,
    pub arpeggio: f64,
    pub trill: f64,
}

/// Expected displacement of a note from its metrical position, in units of
/// typical ornament IOIs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub short_app: f64,
    pub arpeggio: f64,
    pub trill: f64,
}

impl Shift {
    fn short(n: f64) -> Self {
        Shift {
            short_app: n,
            ..Shift::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateLayout {
    pub state_type: StateType,
    /// Score pitches with relative output weights.
    pub pitches: Vec<(Pitch, f64)>,
    pub emission: Vec<EmissionGroup>,
    /// Trill or tremolo cycle, starting after the chordal onset.
    pub cycle: Vec<Vec<Pitch>>,
    pub successions: Successions,
    /// Shift of the first note from the factor's score time.
    pub onset_shift: Shift,
    /// Shift of the last note from the state's end time.
    pub release_shift: Shift,
    pub end_time: Ticks,
    /// Duration of the body (CH) or of the trill within the factor (TR).
    pub note_value: Ticks,
}

impl StateLayout {
    /// Notes emitted in a straight performance, trills excluded.
    pub fn notes(&self) -> usize {
        self.emission.iter().map(|g| g.pitches.len()).sum()
    }

    /// Notes per trill or tremolo repetition.
    pub fn notes_per_repetition(&self) -> usize {
        self.cycle.iter().map(Vec::len).sum()
    }

    /// Distinct score pitches with weight one.
    pub fn main_pitches(&self) -> Vec<Pitch> {
        let mut v: Vec<Pitch> = self.pitches.iter().filter(|(_, w)| *w >= 1.0).map(|(p, _)| *p).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn add_pitch(list: &mut Vec<(Pitch, f64)>, p: Pitch, w: f64) {
    match list.iter_mut().find(|(q, _)| *q == p) {
        Some(e) => e.1 = e.1.max(w),
        None => list.push((p, w)),
    }
}

fn count_successions(groups: &[EmissionGroup]) -> Successions {
    let mut s = Successions::default();
    for (i, g) in groups.iter().enumerate() {
        let within = g.pitches.len().saturating_sub(1) as f64;
        match g.spread {
            Spread::Chord => s.chord += within,
            Spread::Arpeggio => s.arpeggio += within,
        }
        if i > 0 {
            if g.simultaneous {
                s.chord += 1.0;
            } else {
                s.short_app += 1.0;
            }
        }
    }
    s
}

fn grace_states(groups: &[(usize, GraceGroup)], after: bool, end_time: Ticks) -> (Vec<StateLayout>, usize) {
    if groups.is_empty() {
        return (Vec::new(), 0);
    }
    let split = groups.len() == 1 && !groups[0].1.from_ornament;
    let depth = groups.iter().map(|(_, g)| g.chords.len()).max().unwrap_or(0);
    let state = |emission: Vec<EmissionGroup>, onset: f64, release: f64| {
        let mut pitches = Vec::new();
        for g in &emission {
            for &p in &g.pitches {
                add_pitch(&mut pitches, p, 1.0);
            }
        }
        StateLayout {
            state_type: StateType::Sa,
            successions: count_successions(&emission),
            pitches,
            emission,
            cycle: Vec::new(),
            onset_shift: Shift::short(onset),
            release_shift: Shift::short(release),
            end_time,
            note_value: 0,
        }
    };
    let chord_group = |pitches: &[Pitch], simultaneous: bool| EmissionGroup {
        pitches: pitches.to_vec(),
        spread: Spread::Chord,
        simultaneous,
    };
    let states = if split {
        let chords = &groups[0].1.chords;
        let n = chords.len() as f64;
        chords
            .iter()
            .enumerate()
            .map(|(c, ch)| {
                let at = if after { c as f64 - n } else { c as f64 };
                state(vec![chord_group(&ch.pitches, false)], at, at)
            })
            .collect()
    } else {
        // Interleave voices chord by chord.
        let mut emission = Vec::new();
        for c in 0..depth {
            let mut first = true;
            for (_, g) in groups {
                if let Some(ch) = g.chords.get(c) {
                    emission.push(chord_group(&ch.pitches, !first));
                    first = false;
                }
            }
        }
        let d = depth as f64;
        let (onset, release) = if after { (-d, -1.0) } else { (0.0, d - 1.0) };
        vec![state(emission, onset, release)]
    };
    (states, depth)
}

/// Emission groups of the onset notes of non-carryover bodies.
fn onset_groups(f: &CompositeFactor) -> (Vec<EmissionGroup>, usize) {
    let mut plain: Vec<Pitch> = Vec::new();
    let mut arps: Vec<(u32, ArpeggioDirection, Vec<Pitch>)> = Vec::new();
    for b in f.body.iter().filter(|b| !b.carryover) {
        match &b.body {
            Body::Chord(c) => match c.arpeggio {
                Some(a) => match arps.iter_mut().find(|x| x.0 == a.group) {
                    Some(x) => x.2.extend(&c.pitches),
                    None => arps.push((a.group, a.direction, c.pitches.clone())),
                },
                None => plain.extend(&c.pitches),
            },
            Body::Tremolo(t) => plain.extend(t.chords.first().into_iter().flatten()),
            Body::Glissando(g) => plain.extend(&g.start),
            Body::Rest(_) => {}
        }
    }
    let mut groups = Vec::new();
    let mut widest = 0;
    for (_, dir, mut ps) in arps {
        ps.sort_unstable();
        ps.dedup();
        if dir == ArpeggioDirection::Down {
            ps.reverse();
        }
        widest = widest.max(ps.len());
        groups.push(EmissionGroup {
            pitches: ps,
            spread: Spread::Arpeggio,
            simultaneous: true,
        });
    }
    plain.sort_unstable();
    plain.dedup();
    if !plain.is_empty() {
        groups.push(EmissionGroup {
            pitches: plain,
            spread: Spread::Chord,
            simultaneous: true,
        });
    }
    if let Some(g) = groups.first_mut() {
        g.simultaneous = false;
    }
    (groups, widest)
}

/// Repetition cycle of all trill parts, plus their pitches with weights.
fn trill_cycle(f: &CompositeFactor) -> (Vec<Vec<Pitch>>, Vec<(Pitch, f64)>) {
    let mut components: Vec<Vec<Vec<Pitch>>> = Vec::new();
    let mut pitches = Vec::new();
    for b in &f.body {
        match trill_part(&b.body) {
            Some(Body::Tremolo(t)) => {
                let mut cyc = t.chords.clone();
                cyc.rotate_left(1);
                for &p in t.chords.iter().flatten() {
                    add_pitch(&mut pitches, p, 1.0);
                }
                components.push(cyc);
            }
            Some(Body::Chord(c)) => {
                let notes = c.trilled();
                for n in &notes {
                    add_pitch(&mut pitches, n.principal, 1.0);
                    add_pitch(&mut pitches, n.upper, 1.0);
                }
                for n in &notes {
                    if !pitches.iter().any(|(q, _)| *q == n.lower) {
                        pitches.push((n.lower, 0.1));
                    }
                }
                components.push(vec![
                    notes.iter().map(|n| n.upper).collect(),
                    notes.iter().map(|n| n.principal).collect(),
                ]);
            }
            _ => {}
        }
    }
    let len = components.iter().map(Vec::len).max().unwrap_or(0);
    let cycle = (0..len)
        .map(|r| {
            let mut chord: Vec<Pitch> = components.iter().flat_map(|c| c[r % c.len()].iter().copied()).collect();
            chord.sort_unstable();
            chord.dedup();
            chord
        })
        .collect();
    (cycle, pitches)
}

/// Bottom-state layout of one composite factor.
pub fn segment_factor(f: &CompositeFactor) -> Vec<StateLayout> {
    let (mut states, _) = grace_states(&f.after, true, f.score_time);
    let (graces, depth) = grace_states(&f.grace, false, f.score_time);
    states.extend(graces);
    let lead = depth as f64;
    let (emission, widest) = onset_groups(f);
    let body_value = f.body.iter().filter(|b| !b.carryover).map(|b| b.body.value()).max().unwrap_or(0);
    let onset = Shift::short(lead);
    let release = Shift {
        short_app: lead,
        arpeggio: widest.saturating_sub(1) as f64,
        trill: 0.0,
    };
    let mut onset_pitches = Vec::new();
    for g in &emission {
        for &p in &g.pitches {
            add_pitch(&mut onset_pitches, p, 1.0);
        }
    }
    if f.has_trill() {
        let (cycle, trill_pitches) = trill_cycle(f);
        let mut sa_pitches = onset_pitches;
        for &(p, w) in &trill_pitches {
            if w >= 1.0 {
                add_pitch(&mut sa_pitches, p, 1.0);
            }
        }
        states.push(StateLayout {
            state_type: StateType::Sa,
            pitches: sa_pitches,
            successions: count_successions(&emission),
            emission,
            cycle: Vec::new(),
            onset_shift: onset,
            release_shift: release,
            end_time: f.score_time,
            note_value: 0,
        });
        let succ = Successions {
            chord: cycle.iter().map(|c| c.len().saturating_sub(1) as f64).sum(),
            trill: cycle.len() as f64,
            ..Successions::default()
        };
        states.push(StateLayout {
            state_type: StateType::Tr,
            pitches: trill_pitches,
            emission: Vec::new(),
            cycle,
            successions: succ,
            onset_shift: Shift {
                trill: 1.0,
                ..onset
            },
            release_shift: Shift::default(),
            end_time: f.end_time,
            note_value: f.end_time.saturating_sub(f.score_time).max(1),
        });
    } else if !emission.is_empty() {
        states.push(StateLayout {
            state_type: StateType::Ch,
            pitches: onset_pitches,
            successions: count_successions(&emission),
            emission,
            cycle: Vec::new(),
            onset_shift: onset,
            release_shift: release,
            end_time: f.score_time,
            note_value: body_value,
        });
    }
    states
}

/// Layout of every factor of the sequence.
pub fn segment_events(seq: &HomophonizedSequence) -> Vec<Vec<StateLayout>> {
    seq.factors.iter().map(segment_factor).collect()
}
