//! Rewriting of mordents, turns, glissandos and cadenzas into plain factors.

use super::glissando_path;
use crate::error::{Error, Result};
use crate::score::{
    Body, ChordEvent, GraceChord, GraceGroup, GraceKind, HomophonicFactor, OrnamentKind, Pitch,
    PolyphonicScore, Ticks,
};

/// Fraction of a delayed-turn principal held before its turn figure.
pub const DELAYED_TURN_SPLIT: f64 = 0.5;

/// Replaces mordents and turns by grace groups, glissandos by chord runs and
/// notated cadenzas by measured chords. Trills and tremolos are kept.
pub fn expand_notated_ornaments(score: &PolyphonicScore) -> Result<PolyphonicScore> {
    expand_with_split(score, DELAYED_TURN_SPLIT)
}

pub fn expand_with_split(score: &PolyphonicScore, split: f64) -> Result<PolyphonicScore> {
    if !(0.0..1.0).contains(&split) || split == 0.0 {
        return Err(Error::input("delayed-turn split must lie in (0, 1)"));
    }
    let mut out = insert_cadenzas(score);
    for voice in &mut out.voices {
        let mut factors = Vec::with_capacity(voice.factors.len());
        for f in std::mem::take(&mut voice.factors) {
            expand_factor(f, split, &mut factors)?;
        }
        voice.factors = factors;
    }
    Ok(out)
}

fn chords_of(groups: &[Vec<Pitch>]) -> Vec<GraceChord> {
    groups.iter().map(|g| GraceChord::new(g.iter().copied())).collect()
}

fn expand_factor(mut f: HomophonicFactor, split: f64, out: &mut Vec<HomophonicFactor>) -> Result<()> {
    match f.body.take() {
        Some(Body::Glissando(g)) => {
            let path = glissando_path(&g)?;
            let n = path.len() as Ticks;
            if g.value < n {
                return Err(Error::InvalidScore(format!(
                    "glissando of {n} chords needs a value of at least {n} ticks"
                )));
            }
            let times: Vec<Ticks> = (0..=n).map(|j| f.score_time + j * g.value / n).collect();
            for (j, chord) in path.into_iter().enumerate() {
                let mut c = HomophonicFactor::new(
                    times[j],
                    Body::Chord(ChordEvent::new(chord, times[j + 1] - times[j])),
                );
                if j == 0 {
                    c.after = std::mem::replace(&mut f.after, GraceGroup::empty(GraceKind::AfterNote));
                    c.grace = std::mem::replace(&mut f.grace, GraceGroup::empty(GraceKind::ShortAppoggiatura));
                }
                out.push(c);
            }
            Ok(())
        }
        Some(Body::Chord(mut c)) => {
            let Some(orn) = c.ornament.clone() else {
                f.body = Some(Body::Chord(c));
                out.push(f);
                return Ok(());
            };
            let principal: Vec<Pitch> = orn.notes.iter().map(|n| n.principal).collect();
            let upper: Vec<Pitch> = orn.notes.iter().map(|n| n.upper).collect();
            let lower: Vec<Pitch> = orn.notes.iter().map(|n| n.lower).collect();
            let push_group = |group: &mut GraceGroup, chords: Vec<GraceChord>| {
                group.chords.extend(chords);
                group.from_ornament = true;
            };
            match orn.kind {
                OrnamentKind::Trill => {
                    f.body = Some(Body::Chord(c));
                    out.push(f);
                    return Ok(());
                }
                OrnamentKind::UpperMordent => {
                    push_group(&mut f.after, chords_of(&[principal.clone(), upper]));
                }
                OrnamentKind::LowerMordent => {
                    push_group(&mut f.after, chords_of(&[principal.clone(), lower]));
                }
                OrnamentKind::DirectTurn => {
                    push_group(&mut f.grace, chords_of(&[upper, principal.clone(), lower]));
                }
                OrnamentKind::InvertedDirectTurn => {
                    push_group(&mut f.grace, chords_of(&[lower, principal.clone(), upper]));
                }
                OrnamentKind::DelayedTurn | OrnamentKind::InvertedDelayedTurn => {
                    let (first, second) = if orn.kind == OrnamentKind::DelayedTurn {
                        (upper, lower)
                    } else {
                        (lower, upper)
                    };
                    if c.value < 2 {
                        return Err(Error::InvalidScore("delayed turn on a note shorter than 2 ticks".into()));
                    }
                    let held = ((c.value as f64 * split).round() as Ticks).clamp(1, c.value - 1);
                    c.ornament = None;
                    c.value = held;
                    f.body = Some(Body::Chord(c));
                    let time = f.score_time + held;
                    out.push(f);
                    let mut turn = HomophonicFactor {
                        after: GraceGroup::of(
                            GraceKind::AfterNote,
                            chords_of(&[first, principal.clone(), second, principal]),
                        ),
                        grace: GraceGroup::empty(GraceKind::ShortAppoggiatura),
                        body: None,
                        score_time: time,
                        cadenza: false,
                    };
                    turn.after.from_ornament = true;
                    out.push(turn);
                    return Ok(());
                }
            }
            c.ornament = None;
            f.body = Some(Body::Chord(c));
            out.push(f);
            Ok(())
        }
        body => {
            f.body = body;
            out.push(f);
            Ok(())
        }
    }
}

/// Turns every cadenza-flagged grace run into measured chords and makes room for
/// it in all voices by shifting later events and lengthening events that span it.
fn insert_cadenzas(score: &PolyphonicScore) -> PolyphonicScore {
    let mut out = score.clone();
    let default_nominal = (score.ticks_per_quarter as Ticks / 4).max(1);
    loop {
        let found = out.voices.iter().enumerate().find_map(|(v, voice)| {
            voice
                .factors
                .iter()
                .position(|f| f.cadenza && !f.grace.is_empty())
                .map(|i| (v, i))
        });
        let Some((v, i)) = found else { break };
        let cadenza = out.voices[v].factors[i].clone();
        let at = cadenza.score_time;
        let values: Vec<Ticks> = cadenza
            .grace
            .chords
            .iter()
            .map(|c| if c.nominal > 0 { c.nominal } else { default_nominal })
            .collect();
        let span: Ticks = values.iter().sum();

        for (w, voice) in out.voices.iter_mut().enumerate() {
            for f in &mut voice.factors {
                if f.score_time >= at {
                    f.score_time += span;
                } else if w != v && f.score_time + f.value() > at {
                    if let Some(b) = f.body.as_mut() {
                        b.set_value(b.value() + span);
                    }
                }
            }
        }
        for m in &mut out.metronome {
            if m.time >= at {
                m.time += span;
            }
        }

        let mut inserted = Vec::with_capacity(values.len());
        let mut t = at;
        for (j, (chord, value)) in cadenza.grace.chords.iter().zip(&values).enumerate() {
            let mut f = HomophonicFactor::new(t, Body::Chord(ChordEvent::new(chord.pitches.iter().copied(), *value)));
            if j == 0 {
                f.after = cadenza.after.clone();
            }
            inserted.push(f);
            t += value;
        }
        let shifted = &mut out.voices[v].factors[i];
        shifted.cadenza = false;
        shifted.grace = GraceGroup::empty(GraceKind::ShortAppoggiatura);
        shifted.after = GraceGroup::empty(GraceKind::AfterNote);
        if shifted.body.is_none() {
            out.voices[v].factors.remove(i);
        }
        out.voices[v].factors.splice(i..i, inserted);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{
        diatonic_neighbors, GlissScale, GlissandoEvent, Ornament, OrnamentedNote, Voice,
    };

    fn p(m: i32) -> Pitch {
        Pitch::new(m).unwrap()
    }

    fn ornamented_score(kind: OrnamentKind) -> PolyphonicScore {
        let (upper, lower) = diatonic_neighbors(p(60), 0);
        let c = ChordEvent::new([p(60)], 480).with_ornament(Ornament {
            kind,
            notes: vec![OrnamentedNote {
                principal: p(60),
                upper,
                lower,
            }],
        });
        PolyphonicScore::new(480, vec![Voice::new("v", vec![HomophonicFactor::new(0, Body::Chord(c))])])
    }

    fn pitches(g: &GraceGroup) -> Vec<Vec<u8>> {
        g.chords.iter().map(|c| c.pitches.iter().map(|p| p.midi()).collect()).collect()
    }

    #[test]
    fn direct_turn_becomes_grace_run() {
        let s = expand_notated_ornaments(&ornamented_score(OrnamentKind::DirectTurn)).unwrap();
        let f = &s.voices[0].factors[0];
        assert_eq!(pitches(&f.grace), vec![vec![62], vec![60], vec![59]]);
        assert!(f.grace.from_ornament);
        let Some(Body::Chord(c)) = &f.body else { panic!() };
        assert_eq!(c.pitches, vec![p(60)]);
        assert!(c.ornament.is_none());
    }

    #[test]
    fn mordents_become_after_notes() {
        let s = expand_notated_ornaments(&ornamented_score(OrnamentKind::UpperMordent)).unwrap();
        assert_eq!(pitches(&s.voices[0].factors[0].after), vec![vec![60], vec![62]]);
        let s = expand_notated_ornaments(&ornamented_score(OrnamentKind::LowerMordent)).unwrap();
        assert_eq!(pitches(&s.voices[0].factors[0].after), vec![vec![60], vec![59]]);
    }

    #[test]
    fn delayed_turn_splits_principal() {
        let s = expand_notated_ornaments(&ornamented_score(OrnamentKind::DelayedTurn)).unwrap();
        let f = &s.voices[0].factors;
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].value(), 240);
        assert_eq!(f[1].score_time, 240);
        assert_eq!(pitches(&f[1].after), vec![vec![62], vec![60], vec![59], vec![60]]);
    }

    #[test]
    fn no_ornaments_is_identity() {
        let s = crate::score::synth::plain_chords(20, 3);
        assert_eq!(expand_notated_ornaments(&s).unwrap(), s);
    }

    #[test]
    fn chromatic_glissando_chords() {
        let g = GlissandoEvent {
            start: vec![p(60)],
            end: vec![p(65)],
            scale: GlissScale::Chromatic,
            value: 480,
        };
        let s = PolyphonicScore::new(480, vec![Voice::new("v", vec![HomophonicFactor::new(0, Body::Glissando(g))])]);
        let s = expand_notated_ornaments(&s).unwrap();
        let got: Vec<(u64, Vec<u8>)> = s.voices[0]
            .factors
            .iter()
            .map(|f| (f.score_time, f.body.as_ref().unwrap().pitches().iter().map(|p| p.midi()).collect()))
            .collect();
        assert_eq!(
            got,
            vec![(0, vec![60]), (80, vec![61]), (160, vec![62]), (240, vec![63]), (320, vec![64]), (400, vec![65])]
        );
        let total: u64 = s.voices[0].factors.iter().map(|f| f.value()).sum();
        assert_eq!(total, 480);
    }

    #[test]
    fn cadenza_shifts_other_voices() {
        let mut fermata = ChordEvent::new([p(67)], 480);
        fermata.fermata = true;
        let mut cad = HomophonicFactor::chord(480, &[72], 480);
        cad.cadenza = true;
        cad.grace = GraceGroup::of(
            GraceKind::ShortAppoggiatura,
            (0..6).map(|k| GraceChord { pitches: vec![p(74 + k)], nominal: 60 }).collect(),
        );
        let rh = Voice::new("rh", vec![HomophonicFactor::new(0, Body::Chord(fermata)), cad]);
        let lh = Voice::new("lh", vec![HomophonicFactor::chord(0, &[48], 960), HomophonicFactor::chord(960, &[43], 480)]);
        let s = expand_notated_ornaments(&PolyphonicScore::new(480, vec![rh, lh])).unwrap();
        let rh_times: Vec<u64> = s.voices[0].factors.iter().map(|f| f.score_time).collect();
        assert_eq!(rh_times, vec![0, 480, 540, 600, 660, 720, 780, 840]);
        assert_eq!(s.voices[1].factors[0].value(), 960 + 360);
        assert_eq!(s.voices[1].factors[1].score_time, 1320);
        assert!(crate::score::validate_score(&s).is_empty());
    }
}
