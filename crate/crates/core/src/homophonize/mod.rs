//! Merging of a polyphonic score into one sequence of composite factors.

mod ornaments;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{
    normalize_pitches, Body, ChordEvent, GlissandoEvent, GraceChord, GraceGroup, GraceKind,
    HomophonicFactor, Ornament, OrnamentKind, Pitch, PolyphonicScore, Ticks, TremoloEvent, Voice,
};

pub use ornaments::{expand_notated_ornaments, expand_with_split, DELAYED_TURN_SPLIT};

/// The measured component of one voice inside a composite factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoiceBody {
    pub voice: usize,
    pub body: Body,
    /// True when the body is the trill part of an earlier event still sounding.
    pub carryover: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeFactor {
    /// Non-empty after-note groups, tagged with their voice.
    pub after: Vec<(usize, GraceGroup)>,
    pub grace: Vec<(usize, GraceGroup)>,
    /// Sounding bodies; rests are dropped.
    pub body: Vec<VoiceBody>,
    pub score_time: Ticks,
    pub end_time: Ticks,
    pub fermata: bool,
}

impl CompositeFactor {
    pub fn is_empty(&self) -> bool {
        self.after.is_empty() && self.grace.is_empty() && self.body.is_empty()
    }

    pub fn has_trill(&self) -> bool {
        self.body.iter().any(|b| trill_part(&b.body).is_some())
    }

    /// Every body equals its own trill part.
    pub fn purely_trill_like(&self) -> bool {
        !self.body.is_empty() && self.body.iter().all(|b| is_purely_trill_like(&b.body))
    }

    pub fn onset_count(&self) -> usize {
        self.after.iter().chain(&self.grace).map(|(_, g)| g.onset_count()).sum::<usize>()
            + self
                .body
                .iter()
                .filter(|b| !b.carryover)
                .map(|b| b.body.onset_count())
                .sum::<usize>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomophonizedSequence {
    pub factors: Vec<CompositeFactor>,
    pub ticks_per_quarter: u32,
    pub voice_names: Vec<String>,
}

/// Trill part of a body: tremolos whole, the trilled subset of a chord, else nothing.
pub fn trill_part(body: &Body) -> Option<Body> {
    match body {
        Body::Tremolo(t) => Some(Body::Tremolo(t.clone())),
        Body::Chord(c) => {
            let notes = c.trilled();
            if notes.is_empty() {
                return None;
            }
            Some(Body::Chord(ChordEvent {
                pitches: normalize_pitches(notes.iter().map(|n| n.principal)),
                value: c.value,
                ornament: Some(Ornament {
                    kind: OrnamentKind::Trill,
                    notes,
                }),
                arpeggio: None,
                fermata: false,
            }))
        }
        _ => None,
    }
}

pub fn is_purely_trill_like(body: &Body) -> bool {
    match (body, trill_part(body)) {
        (Body::Tremolo(_), _) => true,
        (Body::Chord(c), Some(Body::Chord(t))) => c.pitches == t.pitches,
        _ => false,
    }
}

/// Same trill content, ignoring value and flags.
fn same_trill(a: &Body, b: &Body) -> bool {
    match (a, b) {
        (Body::Tremolo(x), Body::Tremolo(y)) => x.chords == y.chords,
        (Body::Chord(x), Body::Chord(y)) => {
            x.pitches == y.pitches && x.trilled() == y.trilled() && !x.trilled().is_empty()
        }
        _ => false,
    }
}

/// Chords traversed by a glissando, endpoints included.
pub fn glissando_path(g: &GlissandoEvent) -> Result<Vec<Vec<Pitch>>> {
    if g.start.is_empty() || g.end.is_empty() {
        return Err(Error::InvalidScore("glissando without start or end pitches".into()));
    }
    if g.start.len() != g.end.len() {
        return Err(Error::InvalidScore(format!(
            "glissando from {} to {} pitches has no monotone path",
            g.start.len(),
            g.end.len()
        )));
    }
    let mut lines = Vec::with_capacity(g.start.len());
    let mut direction = 0;
    for (&a, &b) in g.start.iter().zip(&g.end) {
        let d = (b.midi() as i32 - a.midi() as i32).signum();
        if d == 0 {
            return Err(Error::InvalidScore(format!("glissando from {a} to itself")));
        }
        if direction != 0 && d != direction {
            return Err(Error::InvalidScore("glissando lines move in opposite directions".into()));
        }
        direction = d;
        let mut line = vec![a];
        let mut m = a.midi() as i32 + d;
        while m != b.midi() as i32 {
            let p = Pitch::new(m)?;
            if g.scale.contains(p) {
                line.push(p);
            }
            m += d;
        }
        line.push(b);
        lines.push(line);
    }
    let n = lines.iter().map(Vec::len).max().unwrap_or(0);
    Ok((0..n)
        .map(|j| {
            normalize_pitches(lines.iter().map(|line| {
                let k = if n == 1 { 0 } else { j * (line.len() - 1) / (n - 1) };
                line[k]
            }))
        })
        .collect())
}

/// Concatenates succeeding factors of each voice that are both empty, or both
/// grace-free with identical purely trill-like bodies.
pub fn reduce_voices(score: &PolyphonicScore) -> PolyphonicScore {
    let mut out = score.clone();
    for voice in &mut out.voices {
        let mut kept: Vec<HomophonicFactor> = Vec::with_capacity(voice.factors.len());
        for f in std::mem::take(&mut voice.factors) {
            if let Some(prev) = kept.last_mut() {
                let both_empty = prev.is_empty() && f.is_empty();
                let same_trill_run = prev.after.is_empty()
                    && prev.grace.is_empty()
                    && f.after.is_empty()
                    && f.grace.is_empty()
                    && match (&prev.body, &f.body) {
                        (Some(a), Some(b)) => {
                            is_purely_trill_like(a) && is_purely_trill_like(b) && same_trill(a, b)
                        }
                        _ => false,
                    };
                if both_empty || same_trill_run {
                    let end = f.score_time + f.value();
                    let fermata = f.body.as_ref().is_some_and(Body::fermata);
                    match prev.body.as_mut() {
                        Some(b) => {
                            b.set_value(end.max(prev.score_time + b.value()) - prev.score_time);
                            if fermata {
                                set_fermata(b);
                            }
                        }
                        None => prev.body = f.body,
                    }
                    continue;
                }
            }
            kept.push(f);
        }
        voice.factors = kept;
    }
    out
}

fn set_fermata(b: &mut Body) {
    match b {
        Body::Rest(r) => r.fermata = true,
        Body::Chord(c) => c.fermata = true,
        Body::Tremolo(t) => t.fermata = true,
        Body::Glissando(_) => {}
    }
}

/// Expands notated ornaments, then merges all voices into one sequence.
pub fn homophonize(score: &PolyphonicScore) -> Result<HomophonizedSequence> {
    if score.voices.iter().all(|v| v.factors.is_empty()) {
        return Err(Error::InvalidScore("empty score".into()));
    }
    if score.ticks_per_quarter == 0 {
        return Err(Error::InvalidScore("ticks_per_quarter is zero".into()));
    }
    for (v, voice) in score.voices.iter().enumerate() {
        if voice.factors.windows(2).any(|w| w[1].score_time <= w[0].score_time) {
            return Err(Error::InvalidScore(format!("voice {v}: non-increasing score time")));
        }
    }
    let score = reduce_voices(&expand_notated_ornaments(score)?);

    let mut grid: Vec<Ticks> = score
        .voices
        .iter()
        .flat_map(|v| v.factors.iter().map(|f| f.score_time))
        .collect();
    grid.sort_unstable();
    grid.dedup();

    let mut cursor = vec![0usize; score.voices.len()];
    let mut tentative: Vec<CompositeFactor> = Vec::with_capacity(grid.len());
    let mut trill_ends: Vec<Ticks> = Vec::with_capacity(grid.len());
    for &t in &grid {
        let mut cf = CompositeFactor {
            after: Vec::new(),
            grace: Vec::new(),
            body: Vec::new(),
            score_time: t,
            end_time: t,
            fermata: false,
        };
        let mut trill_end = t;
        for (v, voice) in score.voices.iter().enumerate() {
            let fs = &voice.factors;
            while cursor[v] + 1 < fs.len() && fs[cursor[v] + 1].score_time <= t {
                cursor[v] += 1;
            }
            let Some(f) = fs.get(cursor[v]) else { continue };
            if f.score_time == t {
                if !f.after.is_empty() {
                    cf.after.push((v, f.after.clone()));
                }
                if !f.grace.is_empty() {
                    cf.grace.push((v, f.grace.clone()));
                }
                if let Some(b) = &f.body {
                    cf.fermata |= b.fermata();
                    if trill_part(b).is_some() {
                        trill_end = trill_end.max(t + b.value());
                    }
                    if !b.is_empty() {
                        cf.body.push(VoiceBody {
                            voice: v,
                            body: b.clone(),
                            carryover: false,
                        });
                    }
                }
            } else if f.score_time < t && t < f.score_time + f.value() {
                if let Some(tr) = f.body.as_ref().and_then(trill_part) {
                    trill_end = trill_end.max(f.score_time + tr.value());
                    cf.body.push(VoiceBody {
                        voice: v,
                        body: tr,
                        carryover: true,
                    });
                }
            }
        }
        tentative.push(cf);
        trill_ends.push(trill_end);
    }
    for i in 0..tentative.len() {
        if tentative[i].has_trill() {
            tentative[i].end_time = match grid.get(i + 1) {
                Some(&next) => next,
                None => trill_ends[i],
            };
        }
    }

    let mut factors: Vec<CompositeFactor> = Vec::with_capacity(tentative.len());
    for cf in tentative {
        let Some(prev) = factors.last_mut() else {
            if !cf.is_empty() {
                factors.push(cf);
            }
            continue;
        };
        if cf.is_empty() {
            continue;
        }
        if cf.after.is_empty()
            && cf.grace.is_empty()
            && cf.purely_trill_like()
            && contained_in(&cf.body, &prev.body)
        {
            prev.end_time = cf.end_time;
            continue;
        }
        factors.push(cf);
    }
    Ok(HomophonizedSequence {
        factors,
        ticks_per_quarter: score.ticks_per_quarter,
        voice_names: score.voices.iter().map(|v| v.name.clone()).collect(),
    })
}

/// Each trill-like body of `inner` is present, as trill content, in the same voice of `outer`.
fn contained_in(inner: &[VoiceBody], outer: &[VoiceBody]) -> bool {
    inner.iter().all(|b| {
        outer.iter().any(|o| {
            o.voice == b.voice
                && trill_part(&o.body).is_some_and(|t| same_trill(&t, &b.body))
        })
    })
}

impl HomophonizedSequence {
    /// Checks strict time order, non-emptiness and absence of contained trill duplicates.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, f) in self.factors.iter().enumerate() {
            if f.is_empty() {
                return Err(Error::InvalidScore(format!("factor {i} is empty")));
            }
            if f.end_time < f.score_time {
                return Err(Error::InvalidScore(format!("factor {i} ends before it starts")));
            }
            if i > 0 {
                let prev = &self.factors[i - 1];
                if f.score_time <= prev.score_time {
                    return Err(Error::InvalidScore(format!("factor {i}: non-increasing score time")));
                }
                if f.after.is_empty()
                    && f.grace.is_empty()
                    && f.purely_trill_like()
                    && contained_in(&f.body, &prev.body)
                {
                    return Err(Error::InvalidScore(format!(
                        "factor {i} repeats the trill of its predecessor"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn onset_count(&self) -> usize {
        self.factors.iter().map(CompositeFactor::onset_count).sum()
    }

    /// Rewrites the sequence as a one-voice score whose factors are the composites.
    pub fn to_single_voice(&self) -> PolyphonicScore {
        let mut factors = Vec::with_capacity(self.factors.len());
        for (i, cf) in self.factors.iter().enumerate() {
            let next = self.factors.get(i + 1).map(|n| n.score_time);
            let value = if cf.has_trill() {
                cf.end_time.max(cf.score_time + 1) - cf.score_time
            } else {
                next.unwrap_or(cf.score_time + self.ticks_per_quarter as Ticks) - cf.score_time
            };
            let merge = |groups: &[(usize, GraceGroup)], kind| {
                let mut g = GraceGroup::empty(kind);
                for (_, x) in groups {
                    g.chords.extend(x.chords.iter().cloned());
                    g.from_ornament |= x.from_ornament;
                }
                if groups.len() > 1 {
                    let pitches = g.chords.iter().flat_map(|c| c.pitches.iter().copied());
                    g.chords = vec![GraceChord::new(pitches)];
                }
                g
            };
            let body = merged_body(&cf.body, value);
            factors.push(HomophonicFactor {
                after: merge(&cf.after, GraceKind::AfterNote),
                grace: merge(&cf.grace, GraceKind::ShortAppoggiatura),
                body,
                score_time: cf.score_time,
                cadenza: false,
            });
            if let (Some(next), true) = (next, cf.has_trill()) {
                if cf.end_time < next {
                    factors.push(HomophonicFactor::rest(cf.end_time, next - cf.end_time));
                }
            }
        }
        PolyphonicScore::new(self.ticks_per_quarter, vec![Voice::new("merged", factors)])
    }

    /// Stable text rendering, one factor per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let pl = |p: &[Pitch]| p.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
        let groups = |gs: &[(usize, GraceGroup)]| {
            gs.iter()
                .map(|(v, g)| {
                    let chords: Vec<String> = g.chords.iter().map(|c| pl(&c.pitches)).collect();
                    format!("{v}:{}{}", chords.join(";"), if g.from_ornament { "*" } else { "" })
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        for (i, f) in self.factors.iter().enumerate() {
            let _ = write!(out, "{i}\t{}\t{}", f.score_time, f.end_time);
            let _ = write!(out, "\ta[{}]\tg[{}]\ty[", groups(&f.after), groups(&f.grace));
            let bodies: Vec<String> = f
                .body
                .iter()
                .map(|b| {
                    let tag = if b.carryover { "~" } else { "" };
                    let desc = match &b.body {
                        Body::Chord(c) => {
                            let tr = c.trilled();
                            if tr.is_empty() {
                                format!("chord {} /{}", pl(&c.pitches), c.value)
                            } else {
                                let t: Vec<Pitch> = tr.iter().map(|n| n.principal).collect();
                                format!("chord {} tr {} /{}", pl(&c.pitches), pl(&t), c.value)
                            }
                        }
                        Body::Tremolo(t) => {
                            let cs: Vec<String> = t.chords.iter().map(|c| pl(c)).collect();
                            format!("trem {} /{}", cs.join(";"), t.value)
                        }
                        Body::Rest(r) => format!("rest /{}", r.value),
                        Body::Glissando(g) => format!("gliss {};{} /{}", pl(&g.start), pl(&g.end), g.value),
                    };
                    format!("{tag}{}:{desc}", b.voice)
                })
                .collect();
            let _ = writeln!(out, "{}]{}", bodies.join(" "), if f.fermata { "\tfermata" } else { "" });
        }
        out
    }
}

fn merged_body(bodies: &[VoiceBody], value: Ticks) -> Option<Body> {
    if bodies.is_empty() {
        return None;
    }
    let tremolos: Vec<&TremoloEvent> = bodies
        .iter()
        .filter_map(|b| match &b.body {
            Body::Tremolo(t) => Some(t),
            _ => None,
        })
        .collect();
    let plain: Vec<Pitch> = bodies
        .iter()
        .filter(|b| !matches!(b.body, Body::Tremolo(_)))
        .flat_map(|b| b.body.pitches())
        .collect();
    if !tremolos.is_empty() {
        let n = tremolos.iter().map(|t| t.chords.len()).max().unwrap_or(2);
        let chords = (0..n)
            .map(|j| {
                let mut c: Vec<Pitch> = tremolos
                    .iter()
                    .flat_map(|t| t.chords.get(j).cloned().unwrap_or_default())
                    .collect();
                if j == 0 {
                    c.extend(plain.iter().copied());
                }
                normalize_pitches(c)
            })
            .collect();
        return Some(Body::Tremolo(TremoloEvent {
            chords,
            value,
            fermata: false,
        }));
    }
    let trilled: Vec<_> = bodies
        .iter()
        .flat_map(|b| match &b.body {
            Body::Chord(c) => c.trilled(),
            _ => Vec::new(),
        })
        .collect();
    let mut chord = ChordEvent::new(plain, value);
    if !trilled.is_empty() {
        chord.ornament = Some(Ornament {
            kind: OrnamentKind::Trill,
            notes: trilled,
        });
    }
    Some(Body::Chord(chord))
}

/// Order-insensitive summary used to compare homophonizations.
pub fn signature(seq: &HomophonizedSequence) -> Vec<(Ticks, Ticks, bool, Vec<Pitch>, Vec<Pitch>, Vec<Pitch>)> {
    let pitches = |gs: &[(usize, GraceGroup)]| {
        normalize_pitches(gs.iter().flat_map(|(_, g)| g.chords.iter().flat_map(|c| c.pitches.iter().copied())))
    };
    seq.factors
        .iter()
        .map(|f| {
            (
                f.score_time,
                f.end_time,
                f.has_trill(),
                pitches(&f.after),
                pitches(&f.grace),
                normalize_pitches(f.body.iter().flat_map(|b| b.body.pitches())),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{OrnamentedNote, Voice};

    fn p(m: i32) -> Pitch {
        Pitch::new(m).unwrap()
    }

    fn trill(time: Ticks, pitch: i32, value: Ticks) -> HomophonicFactor {
        let c = ChordEvent::new([p(pitch)], value).with_ornament(Ornament {
            kind: OrnamentKind::Trill,
            notes: vec![OrnamentedNote {
                principal: p(pitch),
                upper: p(pitch + 2),
                lower: p(pitch - 1),
            }],
        });
        HomophonicFactor::new(time, Body::Chord(c))
    }

    #[test]
    fn trill_part_cases() {
        let trem = Body::Tremolo(TremoloEvent {
            chords: vec![vec![p(60), p(64)], vec![p(62), p(65)]],
            value: 480,
            fermata: false,
        });
        assert_eq!(trill_part(&trem), Some(trem.clone()));
        let mut c = ChordEvent::new([p(60), p(64)], 480);
        c.ornament = Some(Ornament {
            kind: OrnamentKind::Trill,
            notes: vec![OrnamentedNote {
                principal: p(60),
                upper: p(62),
                lower: p(59),
            }],
        });
        let Some(Body::Chord(t)) = trill_part(&Body::Chord(c)) else { panic!() };
        assert_eq!(t.pitches, vec![p(60)]);
        assert_eq!(trill_part(&Body::Chord(ChordEvent::new([p(60)], 480))), None);
    }

    #[test]
    fn single_voice_is_one_to_one() {
        let s = crate::score::synth::plain_chords(10, 1);
        let h = homophonize(&s).unwrap();
        assert_eq!(h.factors.len(), 10);
        for (f, o) in h.factors.iter().zip(&s.voices[0].factors) {
            assert_eq!(f.score_time, o.score_time);
            assert_eq!(f.end_time, f.score_time);
        }
    }

    #[test]
    fn interleaved_grid() {
        let a = Voice::new("a", vec![HomophonicFactor::chord(0, &[60], 240), HomophonicFactor::chord(480, &[62], 240)]);
        let b = Voice::new("b", vec![HomophonicFactor::chord(240, &[48], 480)]);
        let h = homophonize(&PolyphonicScore::new(480, vec![a, b])).unwrap();
        let times: Vec<Ticks> = h.factors.iter().map(|f| f.score_time).collect();
        assert_eq!(times, vec![0, 240, 480]);
    }

    #[test]
    fn trill_against_repeated_chords() {
        let a = Voice::new("a", vec![trill(0, 72, 1920)]);
        let b = Voice::new(
            "b",
            (0..4).map(|k| HomophonicFactor::chord(k * 480, &[48, 55], 480)).collect(),
        );
        let h = homophonize(&PolyphonicScore::new(480, vec![a, b])).unwrap();
        assert_eq!(h.factors.len(), 4);
        assert!(!h.factors[0].body[0].carryover);
        for f in &h.factors[1..] {
            assert_eq!(f.body.len(), 2);
            assert!(f.body.iter().any(|b| b.carryover));
            assert!(f.body.iter().any(|b| !b.carryover));
        }
        let ends: Vec<Ticks> = h.factors.iter().map(|f| f.end_time).collect();
        assert_eq!(ends, vec![480, 960, 1440, 1920]);
        h.check_invariants().unwrap();
    }

    #[test]
    fn contained_trill_is_deleted() {
        // The trill outlasts the other voice's chord, so the composite at 480 holds only the carried trill.
        let a = Voice::new("a", vec![trill(0, 72, 960), HomophonicFactor::chord(960, &[74], 480)]);
        let b = Voice::new("b", vec![HomophonicFactor::chord(0, &[48], 240), HomophonicFactor::rest(240, 240), HomophonicFactor::chord(480, &[50], 480)]);
        let h = homophonize(&PolyphonicScore::new(480, vec![a.clone(), b])).unwrap();
        let times: Vec<Ticks> = h.factors.iter().map(|f| f.score_time).collect();
        assert_eq!(times, vec![0, 480, 960]);
        assert_eq!(h.factors[0].end_time, 480);

        let b2 = Voice::new("b", vec![HomophonicFactor::chord(0, &[48], 480), HomophonicFactor::rest(480, 480)]);
        let h = homophonize(&PolyphonicScore::new(480, vec![a, b2])).unwrap();
        let times: Vec<Ticks> = h.factors.iter().map(|f| f.score_time).collect();
        assert_eq!(times, vec![0, 960]);
        assert_eq!(h.factors[0].end_time, 960);
    }

    #[test]
    fn empty_score_is_error() {
        assert!(homophonize(&PolyphonicScore::new(480, vec![])).is_err());
    }

    #[test]
    fn glissando_paths() {
        let g = GlissandoEvent {
            start: vec![p(60), p(64)],
            end: vec![p(64), p(72)],
            scale: crate::score::GlissScale::WhiteKeys,
            value: 480,
        };
        let path = glissando_path(&g).unwrap();
        assert_eq!(path.first().unwrap(), &vec![p(60), p(64)]);
        assert_eq!(path.last().unwrap(), &vec![p(64), p(72)]);
        assert_eq!(path.len(), 6);
        let bad = GlissandoEvent { end: vec![p(60), p(60)], ..g.clone() };
        assert!(glissando_path(&bad).is_err());
        let mixed = GlissandoEvent { end: vec![p(55), p(72)], ..g };
        assert!(glissando_path(&mixed).is_err());
    }

    #[test]
    fn idempotent_on_synthetic_score() {
        let s = crate::score::synth::ornament_dense(120, 4);
        let h1 = homophonize(&s).unwrap();
        let h2 = homophonize(&h1.to_single_voice()).unwrap();
        let h3 = homophonize(&h2.to_single_voice()).unwrap();
        assert_eq!(signature(&h1), signature(&h2));
        assert_eq!(h2, h3);
    }
}
