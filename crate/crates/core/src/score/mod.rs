//! Score data model: voices of timed factors, each an after-note group, a
//! short-appoggiatura group and a body event sharing one score time.

mod musicxml;
pub mod synth;
mod text;
mod validate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use musicxml::{parse_musicxml, parse_musicxml_with, GraceOverride, GraceOverrides};
pub use text::{parse_text, write_text};
pub use validate::{validate_score, Diagnostic, DiagnosticKind};

/// Score time in ticks.
pub type Ticks = u64;

/// MIDI note number in `[0, 127]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pitch(u8);

impl Pitch {
    pub fn new(midi: i32) -> Result<Self> {
        if (0..=127).contains(&midi) {
            Ok(Pitch(midi as u8))
        } else {
            Err(Error::input(format!("pitch {midi} outside [0, 127]")))
        }
    }

    pub fn midi(self) -> u8 {
        self.0
    }

    pub fn offset(self, semitones: i32) -> Option<Pitch> {
        Pitch::new(self.0 as i32 + semitones).ok()
    }

    /// True for C#, D#, F#, G#, A#.
    pub fn is_black(self) -> bool {
        matches!(self.0 % 12, 1 | 3 | 6 | 8 | 10)
    }
}

impl std::fmt::Display for Pitch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Notated ornaments attachable to a chord.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrnamentKind {
    Trill,
    UpperMordent,
    LowerMordent,
    DirectTurn,
    InvertedDirectTurn,
    DelayedTurn,
    InvertedDelayedTurn,
}

impl OrnamentKind {
    pub const ALL: [OrnamentKind; 7] = [
        OrnamentKind::Trill,
        OrnamentKind::UpperMordent,
        OrnamentKind::LowerMordent,
        OrnamentKind::DirectTurn,
        OrnamentKind::InvertedDirectTurn,
        OrnamentKind::DelayedTurn,
        OrnamentKind::InvertedDelayedTurn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OrnamentKind::Trill => "trill",
            OrnamentKind::UpperMordent => "upper_mordent",
            OrnamentKind::LowerMordent => "lower_mordent",
            OrnamentKind::DirectTurn => "direct_turn",
            OrnamentKind::InvertedDirectTurn => "inverted_direct_turn",
            OrnamentKind::DelayedTurn => "delayed_turn",
            OrnamentKind::InvertedDelayedTurn => "inverted_delayed_turn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// One ornamented note of a chord with its auxiliary neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrnamentedNote {
    pub principal: Pitch,
    pub upper: Pitch,
    pub lower: Pitch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ornament {
    pub kind: OrnamentKind,
    /// The ornamented subset of the chord; several entries form a double trill etc.
    pub notes: Vec<OrnamentedNote>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArpeggioDirection {
    Up,
    Down,
    Unspecified,
}

impl ArpeggioDirection {
    pub fn name(self) -> &'static str {
        match self {
            ArpeggioDirection::Up => "up",
            ArpeggioDirection::Down => "down",
            ArpeggioDirection::Unspecified => "any",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "up" => Some(ArpeggioDirection::Up),
            "down" => Some(ArpeggioDirection::Down),
            "any" | "unspecified" => Some(ArpeggioDirection::Unspecified),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arpeggio {
    pub group: u32,
    pub direction: ArpeggioDirection,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordEvent {
    /// Sorted, without duplicates.
    pub pitches: Vec<Pitch>,
    pub value: Ticks,
    pub ornament: Option<Ornament>,
    pub arpeggio: Option<Arpeggio>,
    pub fermata: bool,
}

impl ChordEvent {
    pub fn new(pitches: impl IntoIterator<Item = Pitch>, value: Ticks) -> Self {
        ChordEvent {
            pitches: normalize_pitches(pitches),
            value,
            ornament: None,
            arpeggio: None,
            fermata: false,
        }
    }

    pub fn with_ornament(mut self, ornament: Ornament) -> Self {
        self.ornament = Some(ornament);
        self
    }

    pub fn trilled(&self) -> Vec<OrnamentedNote> {
        match &self.ornament {
            Some(o) if o.kind == OrnamentKind::Trill => o.notes.clone(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestEvent {
    pub value: Ticks,
    pub fermata: bool,
}

/// Unmeasured tremolo over two or more alternating chords.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TremoloEvent {
    pub chords: Vec<Vec<Pitch>>,
    pub value: Ticks,
    pub fermata: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GlissScale {
    Chromatic,
    /// Major scale of the key with the given number of sharps (negative: flats).
    Diatonic { fifths: i8 },
    WhiteKeys,
    BlackKeys,
}

impl GlissScale {
    pub fn contains(self, p: Pitch) -> bool {
        match self {
            GlissScale::Chromatic => true,
            GlissScale::WhiteKeys => !p.is_black(),
            GlissScale::BlackKeys => p.is_black(),
            GlissScale::Diatonic { fifths } => {
                let tonic = (7 * fifths as i32).rem_euclid(12);
                let degree = (p.midi() as i32 - tonic).rem_euclid(12);
                matches!(degree, 0 | 2 | 4 | 5 | 7 | 9 | 11)
            }
        }
    }

    pub fn name(self) -> String {
        match self {
            GlissScale::Chromatic => "chromatic".into(),
            GlissScale::Diatonic { fifths } => format!("diatonic{fifths}"),
            GlissScale::WhiteKeys => "white".into(),
            GlissScale::BlackKeys => "black".into(),
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "chromatic" => Some(GlissScale::Chromatic),
            "white" | "white_keys" => Some(GlissScale::WhiteKeys),
            "black" | "black_keys" => Some(GlissScale::BlackKeys),
            "diatonic" => Some(GlissScale::Diatonic { fifths: 0 }),
            _ => s
                .strip_prefix("diatonic")
                .and_then(|f| f.parse().ok())
                .map(|fifths| GlissScale::Diatonic { fifths }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlissandoEvent {
    pub start: Vec<Pitch>,
    pub end: Vec<Pitch>,
    pub scale: GlissScale,
    pub value: Ticks,
}

/// The measured part `y` of a factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Body {
    Rest(RestEvent),
    Chord(ChordEvent),
    Tremolo(TremoloEvent),
    Glissando(GlissandoEvent),
}

impl Body {
    pub fn rest(value: Ticks) -> Self {
        Body::Rest(RestEvent {
            value,
            fermata: false,
        })
    }

    pub fn value(&self) -> Ticks {
        match self {
            Body::Rest(r) => r.value,
            Body::Chord(c) => c.value,
            Body::Tremolo(t) => t.value,
            Body::Glissando(g) => g.value,
        }
    }

    pub fn set_value(&mut self, value: Ticks) {
        match self {
            Body::Rest(r) => r.value = value,
            Body::Chord(c) => c.value = value,
            Body::Tremolo(t) => t.value = value,
            Body::Glissando(g) => g.value = value,
        }
    }

    pub fn fermata(&self) -> bool {
        match self {
            Body::Rest(r) => r.fermata,
            Body::Chord(c) => c.fermata,
            Body::Tremolo(t) => t.fermata,
            Body::Glissando(_) => false,
        }
    }

    /// A rest is the empty body.
    pub fn is_empty(&self) -> bool {
        matches!(self, Body::Rest(_))
    }

    /// Number of note onsets the body notates (a tremolo counts each chord once).
    pub fn onset_count(&self) -> usize {
        match self {
            Body::Rest(_) => 0,
            Body::Chord(c) => c.pitches.len(),
            Body::Tremolo(t) => t.chords.iter().map(Vec::len).sum(),
            Body::Glissando(g) => g.start.len() + g.end.len(),
        }
    }

    pub fn pitches(&self) -> Vec<Pitch> {
        match self {
            Body::Rest(_) => Vec::new(),
            Body::Chord(c) => c.pitches.clone(),
            Body::Tremolo(t) => normalize_pitches(t.chords.iter().flatten().copied()),
            Body::Glissando(g) => normalize_pitches(g.start.iter().chain(&g.end).copied()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraceKind {
    ShortAppoggiatura,
    AfterNote,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraceChord {
    pub pitches: Vec<Pitch>,
    /// Notated small-note value; only meaningful inside cadenzas (0 otherwise).
    pub nominal: Ticks,
}

impl GraceChord {
    pub fn new(pitches: impl IntoIterator<Item = Pitch>) -> Self {
        GraceChord {
            pitches: normalize_pitches(pitches),
            nominal: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraceGroup {
    pub kind: GraceKind,
    pub chords: Vec<GraceChord>,
    /// Set when the group encodes an expanded mordent or turn.
    pub from_ornament: bool,
}

impl GraceGroup {
    pub fn empty(kind: GraceKind) -> Self {
        GraceGroup {
            kind,
            chords: Vec::new(),
            from_ornament: false,
        }
    }

    pub fn of(kind: GraceKind, chords: Vec<GraceChord>) -> Self {
        GraceGroup {
            kind,
            chords,
            from_ornament: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.chords.is_empty()
    }

    pub fn onset_count(&self) -> usize {
        self.chords.iter().map(|c| c.pitches.len()).sum()
    }
}

/// `alpha beta y` at one score time within a voice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomophonicFactor {
    pub after: GraceGroup,
    pub grace: GraceGroup,
    pub body: Option<Body>,
    pub score_time: Ticks,
    /// The grace group is a notated cadenza attached to the preceding fermata.
    pub cadenza: bool,
}

impl HomophonicFactor {
    pub fn new(score_time: Ticks, body: Body) -> Self {
        HomophonicFactor {
            after: GraceGroup::empty(GraceKind::AfterNote),
            grace: GraceGroup::empty(GraceKind::ShortAppoggiatura),
            body: Some(body),
            score_time,
            cadenza: false,
        }
    }

    pub fn chord(score_time: Ticks, pitches: &[i32], value: Ticks) -> Self {
        let pitches = pitches.iter().map(|&p| Pitch::new(p).expect("valid pitch"));
        Self::new(score_time, Body::Chord(ChordEvent::new(pitches, value)))
    }

    pub fn rest(score_time: Ticks, value: Ticks) -> Self {
        Self::new(score_time, Body::rest(value))
    }

    /// Empty in the sense of homophonization: no grace notes and a rest or no body.
    pub fn is_empty(&self) -> bool {
        self.after.is_empty()
            && self.grace.is_empty()
            && self.body.as_ref().is_none_or(Body::is_empty)
    }

    pub fn onset_count(&self) -> usize {
        self.after.onset_count()
            + self.grace.onset_count()
            + self.body.as_ref().map_or(0, Body::onset_count)
    }

    pub fn value(&self) -> Ticks {
        self.body.as_ref().map_or(0, Body::value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Voice {
    pub name: String,
    pub factors: Vec<HomophonicFactor>,
}

impl Voice {
    pub fn new(name: impl Into<String>, factors: Vec<HomophonicFactor>) -> Self {
        Voice {
            name: name.into(),
            factors,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetronomeMark {
    pub time: Ticks,
    pub quarter_bpm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyphonicScore {
    pub voices: Vec<Voice>,
    pub ticks_per_quarter: u32,
    pub metronome: Vec<MetronomeMark>,
}

impl PolyphonicScore {
    pub fn new(ticks_per_quarter: u32, voices: Vec<Voice>) -> Self {
        PolyphonicScore {
            voices,
            ticks_per_quarter,
            metronome: Vec::new(),
        }
    }

    pub fn onset_count(&self) -> usize {
        self.voices
            .iter()
            .flat_map(|v| &v.factors)
            .map(HomophonicFactor::onset_count)
            .sum()
    }

    /// Seconds per tick of the first metronome mark, else 0.5 s per quarter.
    pub fn reference_tempo(&self) -> f64 {
        let bpm = self.metronome.first().map_or(120.0, |m| m.quarter_bpm);
        60.0 / bpm / self.ticks_per_quarter as f64
    }
}

pub(crate) fn normalize_pitches(pitches: impl IntoIterator<Item = Pitch>) -> Vec<Pitch> {
    let mut v: Vec<Pitch> = pitches.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Diatonic upper and lower neighbours of `p` in the major key with `fifths` sharps.
pub fn diatonic_neighbors(p: Pitch, fifths: i8) -> (Pitch, Pitch) {
    let scale = GlissScale::Diatonic { fifths };
    let step = |dir: i32| {
        (1..=2)
            .map(|d| p.midi() as i32 + dir * d)
            .find(|&m| (0..=127).contains(&m) && scale.contains(Pitch(m as u8)))
            .map(|m| Pitch(m as u8))
            .unwrap_or(p)
    };
    (step(1), step(-1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pitch_range() {
        assert!(Pitch::new(0).is_ok());
        assert!(Pitch::new(127).is_ok());
        assert!(Pitch::new(128).is_err());
        assert!(Pitch::new(-1).is_err());
    }

    #[test]
    fn neighbours_in_c_major() {
        let c4 = Pitch::new(60).unwrap();
        let (u, l) = diatonic_neighbors(c4, 0);
        assert_eq!((u.midi(), l.midi()), (62, 59));
        let e4 = Pitch::new(64).unwrap();
        let (u, l) = diatonic_neighbors(e4, 0);
        assert_eq!((u.midi(), l.midi()), (65, 62));
        // G major: F# is diatonic.
        let g4 = Pitch::new(67).unwrap();
        assert_eq!(diatonic_neighbors(g4, 1).1.midi(), 66);
    }

    #[test]
    fn scale_membership() {
        assert!(GlissScale::WhiteKeys.contains(Pitch::new(60).unwrap()));
        assert!(!GlissScale::WhiteKeys.contains(Pitch::new(61).unwrap()));
        assert!(GlissScale::BlackKeys.contains(Pitch::new(61).unwrap()));
        assert!(GlissScale::Diatonic { fifths: 2 }.contains(Pitch::new(61).unwrap()));
        assert_eq!(GlissScale::from_name("diatonic-3"), Some(GlissScale::Diatonic { fifths: -3 }));
    }
}
