//! Seeded synthetic scores for benchmarks and round-trip experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    diatonic_neighbors, Arpeggio, ArpeggioDirection, Body, ChordEvent, GraceChord, GraceGroup,
    GraceKind, HomophonicFactor, MetronomeMark, Ornament, OrnamentKind, OrnamentedNote, Pitch,
    PolyphonicScore, Ticks, TremoloEvent, Voice,
};

pub const TPQ: u32 = 480;

fn p(m: i32) -> Pitch {
    Pitch::new(m).expect("synthetic pitch in range")
}

/// Next white key from `m` stepping by `steps` diatonic degrees.
fn white_step(m: i32, steps: i32) -> i32 {
    let mut x = m;
    let dir = steps.signum();
    for _ in 0..steps.abs() {
        x += dir;
        while p(x).is_black() {
            x += dir;
        }
    }
    x
}

fn ornamented(pitch: i32) -> OrnamentedNote {
    let (upper, lower) = diatonic_neighbors(p(pitch), 0);
    OrnamentedNote {
        principal: p(pitch),
        upper,
        lower,
    }
}

fn chord_under(rng: &mut ChaCha8Rng, top: i32, max_notes: usize) -> Vec<Pitch> {
    let n = rng.gen_range(1..=max_notes);
    let mut v = vec![p(top)];
    let mut x = top;
    for _ in 1..n {
        x = white_step(x, -rng.gen_range(2..=3));
        v.push(p(x));
    }
    v
}

/// Two-voice piano-like score with roughly `events` onset times and frequent ornaments:
/// trills, mordents, turns, grace runs, after notes, arpeggios and tremolos.
pub fn ornament_dense(events: usize, seed: u64) -> PolyphonicScore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = TPQ as Ticks;
    let mut rh = Vec::with_capacity(events);
    let mut lh = Vec::new();
    let mut t: Ticks = 0;
    let mut melody = 72;
    let mut arp_group = 0;
    let mut lh_free_at: Ticks = 0;
    while rh.len() < events {
        melody = white_step(melody, rng.gen_range(-2..=2)).clamp(62, 86);
        let value = if rng.gen_bool(0.6) { q / 2 } else { q };
        let roll: f64 = rng.gen();
        let mut f;
        if roll < 0.07 {
            let value = 2 * q;
            let notes = if rng.gen_bool(0.2) {
                vec![ornamented(melody), ornamented(white_step(melody, -2))]
            } else {
                vec![ornamented(melody)]
            };
            let pitches: Vec<Pitch> = notes.iter().map(|n| n.principal).collect();
            let chord = ChordEvent::new(pitches, value).with_ornament(Ornament {
                kind: OrnamentKind::Trill,
                notes,
            });
            f = HomophonicFactor::new(t, Body::Chord(chord));
            if rng.gen_bool(0.5) {
                let o = ornamented(melody);
                f.after = GraceGroup::of(
                    GraceKind::AfterNote,
                    vec![GraceChord::new([o.lower]), GraceChord::new([o.principal])],
                );
            }
        } else if roll < 0.11 {
            let kind = if rng.gen_bool(0.5) {
                OrnamentKind::UpperMordent
            } else {
                OrnamentKind::LowerMordent
            };
            let chord = ChordEvent::new([p(melody)], value).with_ornament(Ornament {
                kind,
                notes: vec![ornamented(melody)],
            });
            f = HomophonicFactor::new(t, Body::Chord(chord));
        } else if roll < 0.14 {
            let kind = match rng.gen_range(0..4) {
                0 => OrnamentKind::DirectTurn,
                1 => OrnamentKind::InvertedDirectTurn,
                2 => OrnamentKind::DelayedTurn,
                _ => OrnamentKind::InvertedDelayedTurn,
            };
            let chord = ChordEvent::new([p(melody)], q).with_ornament(Ornament {
                kind,
                notes: vec![ornamented(melody)],
            });
            f = HomophonicFactor::new(t, Body::Chord(chord));
        } else if roll < 0.22 {
            f = HomophonicFactor::new(t, Body::Chord(ChordEvent::new(chord_under(&mut rng, melody, 3), value)));
            let n = rng.gen_range(1..=3);
            let mut g = Vec::new();
            let mut x = white_step(melody, n);
            for _ in 0..n {
                g.push(GraceChord::new([p(x)]));
                x = white_step(x, -1);
            }
            f.grace = GraceGroup::of(GraceKind::ShortAppoggiatura, g);
        } else if roll < 0.30 {
            arp_group += 1;
            let mut chord = ChordEvent::new(chord_under(&mut rng, melody, 4), q);
            if chord.pitches.len() < 3 {
                chord = ChordEvent::new([p(melody), p(white_step(melody, -2)), p(white_step(melody, -4))], q);
            }
            chord.arpeggio = Some(Arpeggio {
                group: arp_group,
                direction: ArpeggioDirection::Up,
            });
            f = HomophonicFactor::new(t, Body::Chord(chord));
        } else if roll < 0.33 {
            let mut a = chord_under(&mut rng, melody, 2);
            let mut b: Vec<Pitch> = a.iter().map(|x| p(white_step(x.midi() as i32, -2))).collect();
            a.sort();
            b.sort();
            f = HomophonicFactor::new(
                t,
                Body::Tremolo(TremoloEvent {
                    chords: vec![a, b],
                    value: 2 * q,
                    fermata: false,
                }),
            );
        } else if roll < 0.35 {
            f = HomophonicFactor::rest(t, value);
        } else {
            f = HomophonicFactor::new(t, Body::Chord(ChordEvent::new(chord_under(&mut rng, melody, 2), value)));
        }
        let dur = f.value().max(q / 2);
        if t >= lh_free_at && rng.gen_bool(0.5) {
            let bass = white_step(48, rng.gen_range(-5..=5));
            let lh_value = dur.max(q);
            let mut pitches = vec![p(bass)];
            if rng.gen_bool(0.5) {
                pitches.push(p(white_step(bass, 4)));
            }
            lh.push(HomophonicFactor::new(t, Body::Chord(ChordEvent::new(pitches, lh_value))));
            lh_free_at = t + lh_value;
        }
        rh.push(f);
        t += dur;
    }
    let mut score = PolyphonicScore::new(TPQ, vec![Voice::new("rh", rh), Voice::new("lh", lh)]);
    score.metronome.push(MetronomeMark {
        time: 0,
        quarter_bpm: 100.0,
    });
    score
}

/// Plain chord sequence with `events` factors in one voice; no ornaments.
pub fn plain_chords(events: usize, seed: u64) -> PolyphonicScore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = TPQ as Ticks;
    let mut melody = 67;
    let factors = (0..events)
        .map(|i| {
            melody = white_step(melody, rng.gen_range(-2..=2)).clamp(55, 84);
            HomophonicFactor::new(i as Ticks * q, Body::Chord(ChordEvent::new(chord_under(&mut rng, melody, 3), q)))
        })
        .collect();
    PolyphonicScore::new(TPQ, vec![Voice::new("v1", factors)])
}
