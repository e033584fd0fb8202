//! Partwise MusicXML import.

use std::collections::BTreeSet;

use roxmltree::{Document, Node};

use super::{
    diatonic_neighbors, normalize_pitches, Arpeggio, ArpeggioDirection, Body, ChordEvent,
    GlissScale, GlissandoEvent, GraceChord, GraceGroup, GraceKind, HomophonicFactor,
    MetronomeMark, Ornament, OrnamentKind, OrnamentedNote, Pitch, PolyphonicScore, RestEvent,
    Ticks, TremoloEvent, Voice,
};
use crate::error::{Error, Result};

const MAX_TPQ: u64 = 960;
/// Grace runs at least this long after a fermata are read as a notated cadenza.
const CADENZA_MIN_RUN: usize = 6;

/// Per-piece correction of the after-note / short-appoggiatura heuristic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraceOverride {
    pub part: String,
    pub measure: String,
    /// 1-based index of the grace chord among the part's grace chords in the measure.
    pub ordinal: usize,
    pub kind: GraceKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraceOverrides(pub Vec<GraceOverride>);

impl GraceOverrides {
    /// Parses lines of `<part_id> <measure> <grace_ordinal> after|short`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::parse(n + 1, "expected `part measure ordinal after|short`"));
            }
            let ordinal = f[2]
                .parse()
                .map_err(|_| Error::parse(n + 1, format!("bad ordinal `{}`", f[2])))?;
            let kind = match f[3] {
                "after" => GraceKind::AfterNote,
                "short" => GraceKind::ShortAppoggiatura,
                k => return Err(Error::parse(n + 1, format!("unknown grace kind `{k}`"))),
            };
            out.push(GraceOverride {
                part: f[0].into(),
                measure: f[1].into(),
                ordinal,
                kind,
            });
        }
        Ok(GraceOverrides(out))
    }

    fn lookup(&self, part: &str, measure: &str, ordinal: usize) -> Option<GraceKind> {
        self.0
            .iter()
            .find(|o| o.part == part && o.measure == measure && o.ordinal == ordinal)
            .map(|o| o.kind)
    }
}

pub fn parse_musicxml(document: &[u8]) -> Result<PolyphonicScore> {
    parse_musicxml_with(document, &GraceOverrides::default())
}

pub fn parse_musicxml_with(document: &[u8], overrides: &GraceOverrides) -> Result<PolyphonicScore> {
    let text = std::str::from_utf8(document).map_err(|e| Error::Parse {
        line: 0,
        column: 0,
        message: format!("document is not UTF-8: {e}"),
    })?;
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        Error::Parse {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let root = doc.root_element();
    match root.tag_name().name() {
        "score-partwise" => {}
        "score-timewise" => {
            return Err(Error::Unsupported {
                element: "score-timewise".into(),
                message: "only partwise documents are supported".into(),
            })
        }
        other => {
            return Err(Error::Unsupported {
                element: other.into(),
                message: "not a MusicXML score".into(),
            })
        }
    }

    let tpq = global_resolution(root);
    let mut ctx = Importer {
        doc: &doc,
        tpq,
        overrides,
        voices: Vec::new(),
        metronome: Vec::new(),
    };
    for part in children(root, "part") {
        ctx.part(part)?;
    }
    let mut metronome = ctx.metronome;
    metronome.sort_by_key(|m| m.time);
    metronome.dedup_by_key(|m| m.time);
    let voices = ctx
        .voices
        .into_iter()
        .filter(|v| !v.factors.is_empty())
        .map(|v| Voice::new(v.name, v.factors))
        .collect();
    Ok(PolyphonicScore {
        voices,
        ticks_per_quarter: tpq as u32,
        metronome,
    })
}

fn children<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children()
        .filter(move |c| c.is_element() && c.tag_name().name() == name)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> Option<Node<'a, 'i>> {
    children(node, name).next()
}

fn child_text<'a>(node: Node<'a, '_>, name: &'static str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Least common multiple of all `divisions` values, capped.
fn global_resolution(root: Node<'_, '_>) -> u64 {
    let mut l = 1u64;
    for d in root
        .descendants()
        .filter(|n| n.has_tag_name("divisions"))
        .filter_map(|n| n.text()?.trim().parse::<f64>().ok())
    {
        let d = d.round().max(1.0) as u64;
        l = l / gcd(l, d) * d;
        if l > MAX_TPQ {
            return MAX_TPQ;
        }
    }
    l
}

struct Importer<'d, 'i> {
    doc: &'d Document<'i>,
    tpq: u64,
    overrides: &'d GraceOverrides,
    voices: Vec<VoiceBuild>,
    metronome: Vec<MetronomeMark>,
}

struct PendingGrace {
    chord: GraceChord,
    explicit: Option<GraceKind>,
    before_barline: bool,
}

struct VoiceBuild {
    key: (String, String),
    name: String,
    factors: Vec<HomophonicFactor>,
    pending: Vec<PendingGrace>,
    open_ties: BTreeSet<Pitch>,
    end_time: Ticks,
    tremolo_start: Option<usize>,
    gliss_start: Option<(usize, GlissScale)>,
}

#[derive(Default)]
struct NoteInfo {
    pitch: Option<Pitch>,
    duration: Ticks,
    grace: Option<(bool, bool)>,
    nominal: Ticks,
    chord: bool,
    voice: String,
    tie_start: bool,
    tie_stop: bool,
    ornament: Option<OrnamentKind>,
    arpeggio: Option<Arpeggio>,
    fermata: bool,
    tremolo: Option<(String, u32)>,
    gliss: Option<(bool, GlissScale)>,
}

impl<'d, 'i> Importer<'d, 'i> {
    fn error_at(&self, node: Node<'_, '_>, message: impl Into<String>) -> Error {
        let pos = self.doc.text_pos_at(node.range().start);
        Error::Parse {
            line: pos.row,
            column: pos.col,
            message: message.into(),
        }
    }

    fn part(&mut self, part: Node<'_, '_>) -> Result<()> {
        let part_id = part.attribute("id").unwrap_or("P1").to_string();
        let mut divisions = 1u64;
        let mut fifths = 0i8;
        let mut cursor: Ticks = 0;
        let first_voice = self.voices.len();
        let mut arp_groups = 0u32;
        for measure in children(part, "measure") {
            let number = measure.attribute("number").unwrap_or("").to_string();
            let start = cursor;
            let mut extent = cursor;
            let mut group: Vec<NoteInfo> = Vec::new();
            let mut group_time = cursor;
            let mut grace_ordinal = 0usize;
            for el in measure.children().filter(Node::is_element) {
                let name = el.tag_name().name();
                if name != "note" && !group.is_empty() {
                    self.flush(&part_id, &number, fifths, &mut grace_ordinal, group_time, &mut group)?;
                }
                match name {
                    "attributes" => {
                        if let Some(d) = child_text(el, "divisions") {
                            divisions = d
                                .parse::<f64>()
                                .map_err(|_| self.error_at(el, "bad divisions"))?
                                .round()
                                .max(1.0) as u64;
                        }
                        if let Some(f) = child(el, "key").and_then(|k| child_text(k, "fifths")) {
                            fifths = f.parse().map_err(|_| self.error_at(el, "bad key fifths"))?;
                        }
                    }
                    "backup" | "forward" => {
                        let d = self.duration(el, divisions)?;
                        if name == "backup" {
                            cursor = cursor.saturating_sub(d);
                        } else {
                            cursor += d;
                            extent = extent.max(cursor);
                        }
                    }
                    "direction" => {
                        for s in el.descendants().filter(|n| n.has_tag_name("sound")) {
                            self.tempo(s, cursor);
                        }
                        if let Some(m) = el.descendants().find(|n| n.has_tag_name("metronome")) {
                            self.metronome_mark(m, cursor);
                        }
                    }
                    "sound" => self.tempo(el, cursor),
                    "note" => {
                        if child(el, "cue").is_some() {
                            continue;
                        }
                        let info = self.note(el, divisions, &mut arp_groups)?;
                        if !info.chord && !group.is_empty() {
                            self.flush(&part_id, &number, fifths, &mut grace_ordinal, group_time, &mut group)?;
                        }
                        if info.chord && group.is_empty() {
                            return Err(self.error_at(el, "<chord/> without a preceding note"));
                        }
                        if !info.chord {
                            group_time = cursor;
                            if info.grace.is_none() {
                                cursor += info.duration;
                                extent = extent.max(cursor);
                            }
                        }
                        group.push(info);
                    }
                    _ => {}
                }
            }
            if !group.is_empty() {
                self.flush(&part_id, &number, fifths, &mut grace_ordinal, group_time, &mut group)?;
            }
            for v in &mut self.voices[first_voice..] {
                for g in &mut v.pending {
                    g.before_barline = true;
                }
            }
            cursor = extent.max(start);
        }
        for v in &mut self.voices[first_voice..] {
            if !v.pending.is_empty() {
                let time = v.end_time;
                let pending = std::mem::take(&mut v.pending);
                let chords = pending.into_iter().map(|g| g.chord).collect();
                v.factors.push(HomophonicFactor {
                    after: GraceGroup::of(GraceKind::AfterNote, chords),
                    grace: GraceGroup::empty(GraceKind::ShortAppoggiatura),
                    body: None,
                    score_time: time,
                    cadenza: false,
                });
            }
        }
        Ok(())
    }

    fn duration(&self, el: Node<'_, '_>, divisions: u64) -> Result<Ticks> {
        let text = child_text(el, "duration").ok_or_else(|| self.error_at(el, "missing <duration>"))?;
        let d: f64 = text
            .parse()
            .map_err(|_| self.error_at(el, format!("bad duration `{text}`")))?;
        Ok((d * self.tpq as f64 / divisions as f64).round().max(0.0) as Ticks)
    }

    fn tempo(&mut self, sound: Node<'_, '_>, time: Ticks) {
        if let Some(bpm) = sound.attribute("tempo").and_then(|t| t.parse::<f64>().ok()) {
            if bpm > 0.0 {
                self.metronome.push(MetronomeMark {
                    time,
                    quarter_bpm: bpm,
                });
            }
        }
    }

    fn metronome_mark(&mut self, m: Node<'_, '_>, time: Ticks) {
        let Some(unit) = child_text(m, "beat-unit").and_then(type_quarters) else { return };
        let dot = if child(m, "beat-unit-dot").is_some() { 1.5 } else { 1.0 };
        let Some(per_minute) = child_text(m, "per-minute").and_then(|p| p.parse::<f64>().ok()) else {
            return;
        };
        if self.metronome.iter().any(|x| x.time == time) || per_minute <= 0.0 {
            return;
        }
        self.metronome.push(MetronomeMark {
            time,
            quarter_bpm: per_minute * unit * dot,
        });
    }

    fn note(
        &self,
        el: Node<'_, '_>,
        divisions: u64,
        arp_groups: &mut u32,
    ) -> Result<NoteInfo> {
        let mut info = NoteInfo {
            chord: child(el, "chord").is_some(),
            ..Default::default()
        };
        if child(el, "unpitched").is_some() {
            return Err(Error::Unsupported {
                element: "unpitched".into(),
                message: "percussion notes are not supported".into(),
            });
        }
        if let Some(p) = child(el, "pitch") {
            let step = child_text(p, "step").ok_or_else(|| self.error_at(p, "missing <step>"))?;
            let octave: i32 = child_text(p, "octave")
                .and_then(|o| o.parse().ok())
                .ok_or_else(|| self.error_at(p, "missing or bad <octave>"))?;
            let alter: f64 = child_text(p, "alter").and_then(|a| a.parse().ok()).unwrap_or(0.0);
            let base = match step {
                "C" => 0,
                "D" => 2,
                "E" => 4,
                "F" => 5,
                "G" => 7,
                "A" => 9,
                "B" => 11,
                s => return Err(self.error_at(p, format!("bad step `{s}`"))),
            };
            let midi = (octave + 1) * 12 + base + alter.round() as i32;
            info.pitch = Some(Pitch::new(midi).map_err(|e| self.error_at(p, e.to_string()))?);
        } else if child(el, "rest").is_none() {
            return Err(self.error_at(el, "note without <pitch> or <rest>"));
        }
        if let Some(g) = child(el, "grace") {
            info.grace = Some((
                g.attribute("slash") == Some("yes"),
                g.attribute("steal-time-following").is_some(),
            ));
            info.nominal = child_text(el, "type")
                .and_then(type_quarters)
                .map_or(0, |q| (q * self.tpq as f64).round() as Ticks);
        } else {
            info.duration = self.duration(el, divisions)?;
        }
        info.voice = match (child_text(el, "voice"), child_text(el, "staff")) {
            (Some(v), _) => v.to_string(),
            (None, Some(s)) => format!("s{s}"),
            (None, None) => "1".into(),
        };
        for t in children(el, "tie") {
            match t.attribute("type") {
                Some("start") => info.tie_start = true,
                Some("stop") => info.tie_stop = true,
                _ => {}
            }
        }
        for n in children(el, "notations") {
            for c in n.children().filter(Node::is_element) {
                match c.tag_name().name() {
                    "tied" => match c.attribute("type") {
                        Some("start") => info.tie_start = true,
                        Some("stop") => info.tie_stop = true,
                        _ => {}
                    },
                    "fermata" => info.fermata = true,
                    "arpeggiate" => {
                        let group = match c.attribute("number").and_then(|n| n.parse().ok()) {
                            Some(g) => g,
                            None => {
                                *arp_groups += 1;
                                1000 + *arp_groups
                            }
                        };
                        let direction = match c.attribute("direction") {
                            Some("up") => ArpeggioDirection::Up,
                            Some("down") => ArpeggioDirection::Down,
                            _ => ArpeggioDirection::Unspecified,
                        };
                        info.arpeggio = Some(Arpeggio { group, direction });
                    }
                    "glissando" | "slide" => {
                        let scale = if c.tag_name().name() == "slide" {
                            GlissScale::Chromatic
                        } else {
                            GlissScale::WhiteKeys
                        };
                        match c.attribute("type") {
                            Some("start") => info.gliss = Some((true, scale)),
                            Some("stop") => info.gliss = Some((false, scale)),
                            _ => {}
                        }
                    }
                    "ornaments" => {
                        for o in c.children().filter(Node::is_element) {
                            let kind = match o.tag_name().name() {
                                "trill-mark" => Some(OrnamentKind::Trill),
                                "inverted-mordent" => Some(OrnamentKind::UpperMordent),
                                "mordent" => Some(OrnamentKind::LowerMordent),
                                "turn" => Some(OrnamentKind::DirectTurn),
                                "inverted-turn" => Some(OrnamentKind::InvertedDirectTurn),
                                "delayed-turn" => Some(OrnamentKind::DelayedTurn),
                                "delayed-inverted-turn" => Some(OrnamentKind::InvertedDelayedTurn),
                                "tremolo" => {
                                    let marks = o.text().and_then(|t| t.trim().parse().ok()).unwrap_or(3);
                                    let ty = o.attribute("type").unwrap_or("single").to_string();
                                    info.tremolo = Some((ty, marks));
                                    None
                                }
                                _ => None,
                            };
                            if kind.is_some() {
                                info.ornament = kind;
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(info)
    }

    fn voice_index(&mut self, part: &str, voice: &str) -> usize {
        let key = (part.to_string(), voice.to_string());
        if let Some(i) = self.voices.iter().position(|v| v.key == key) {
            return i;
        }
        self.voices.push(VoiceBuild {
            name: format!("{part}:{voice}"),
            key,
            factors: Vec::new(),
            pending: Vec::new(),
            open_ties: BTreeSet::new(),
            end_time: 0,
            tremolo_start: None,
            gliss_start: None,
        });
        self.voices.len() - 1
    }

    fn flush(
        &mut self,
        part: &str,
        measure: &str,
        fifths: i8,
        grace_ordinal: &mut usize,
        time: Ticks,
        group: &mut Vec<NoteInfo>,
    ) -> Result<()> {
        let notes = std::mem::take(group);
        let head = &notes[0];
        let vi = self.voice_index(part, &head.voice);
        let v = &mut self.voices[vi];

        if let Some((slash, steal_following)) = head.grace {
            *grace_ordinal += 1;
            let explicit = self
                .overrides
                .lookup(part, measure, *grace_ordinal)
                .or(if slash {
                    Some(GraceKind::ShortAppoggiatura)
                } else if steal_following {
                    Some(GraceKind::AfterNote)
                } else {
                    None
                });
            let chord = GraceChord {
                pitches: normalize_pitches(notes.iter().filter_map(|n| n.pitch)),
                nominal: head.nominal,
            };
            if !chord.pitches.is_empty() {
                v.pending.push(PendingGrace {
                    chord,
                    explicit,
                    before_barline: false,
                });
            }
            return Ok(());
        }

        let duration = head.duration;
        v.end_time = v.end_time.max(time + duration);
        if head.pitch.is_none() {
            let fermata = notes.iter().any(|n| n.fermata);
            push_factor(v, time, Body::Rest(RestEvent { value: duration, fermata }));
            return Ok(());
        }

        let mut sounding = Vec::new();
        for n in &notes {
            let p = n.pitch.expect("pitched group");
            let continued = n.tie_stop && v.open_ties.remove(&p);
            if n.tie_start {
                v.open_ties.insert(p);
            }
            if !continued {
                sounding.push(p);
            }
        }
        let fermata = notes.iter().any(|n| n.fermata);

        if let Some(start) = v.tremolo_start.take() {
            if notes.iter().any(|n| matches!(&n.tremolo, Some((t, _)) if t == "stop")) {
                if let Some(Body::Chord(c)) = v.factors[start].body.take() {
                    v.factors[start].body = Some(Body::Tremolo(TremoloEvent {
                        chords: vec![c.pitches, normalize_pitches(sounding)],
                        value: c.value + duration,
                        fermata: c.fermata || fermata,
                    }));
                }
                return Ok(());
            }
        }
        if let Some((start, scale)) = v.gliss_start.take() {
            if notes.iter().any(|n| matches!(n.gliss, Some((false, _)))) {
                if let Some(Body::Chord(c)) = v.factors[start].body.take() {
                    v.factors[start].body = Some(Body::Glissando(GlissandoEvent {
                        start: c.pitches,
                        end: normalize_pitches(sounding),
                        scale,
                        value: c.value + duration,
                    }));
                }
                return Ok(());
            }
        }

        if sounding.is_empty() && v.pending.is_empty() {
            if let Some(body) = v.factors.last_mut().and_then(|f| f.body.as_mut()) {
                body.set_value(body.value() + duration);
                return Ok(());
            }
        }
        if sounding.is_empty() {
            push_factor(v, time, Body::Rest(RestEvent { value: duration, fermata }));
            return Ok(());
        }

        let mut chord = ChordEvent::new(sounding.iter().copied(), duration);
        chord.fermata = fermata;
        chord.arpeggio = notes.iter().find_map(|n| n.arpeggio);
        if let Some(kind) = notes.iter().find_map(|n| n.ornament) {
            let ornamented = notes
                .iter()
                .filter(|n| n.ornament.is_some())
                .filter_map(|n| n.pitch)
                .filter(|p| chord.pitches.contains(p))
                .map(|p| {
                    let (upper, lower) = diatonic_neighbors(p, fifths);
                    OrnamentedNote {
                        principal: p,
                        upper,
                        lower,
                    }
                })
                .collect::<Vec<_>>();
            if !ornamented.is_empty() {
                chord.ornament = Some(Ornament {
                    kind,
                    notes: ornamented,
                });
            }
        }
        let single_tremolo = notes
            .iter()
            .any(|n| matches!(&n.tremolo, Some((t, _)) if t == "single"));
        let body = if single_tremolo {
            Body::Tremolo(TremoloEvent {
                chords: vec![chord.pitches.clone(), chord.pitches.clone()],
                value: chord.value,
                fermata: chord.fermata,
            })
        } else {
            Body::Chord(chord)
        };
        push_factor(v, time, body);
        let idx = v.factors.len() - 1;
        if notes.iter().any(|n| matches!(&n.tremolo, Some((t, _)) if t == "start")) {
            v.tremolo_start = Some(idx);
        }
        if let Some((true, scale)) = notes.iter().find_map(|n| n.gliss) {
            v.gliss_start = Some((idx, scale));
        }
        Ok(())
    }
}

fn push_factor(v: &mut VoiceBuild, time: Ticks, body: Body) {
    let pending = std::mem::take(&mut v.pending);
    let after_fermata = v
        .factors
        .last()
        .and_then(|f| f.body.as_ref())
        .is_some_and(Body::fermata);
    let mut f = HomophonicFactor::new(time, body);
    if after_fermata && pending.len() >= CADENZA_MIN_RUN {
        f.cadenza = true;
        f.grace.chords = pending.into_iter().map(|g| g.chord).collect();
    } else {
        for g in pending {
            let kind = g.explicit.unwrap_or(if g.before_barline {
                GraceKind::AfterNote
            } else {
                GraceKind::ShortAppoggiatura
            });
            let chord = GraceChord {
                pitches: g.chord.pitches,
                nominal: 0,
            };
            match kind {
                GraceKind::AfterNote => f.after.chords.push(chord),
                GraceKind::ShortAppoggiatura => f.grace.chords.push(chord),
            }
        }
    }
    v.factors.push(f);
}

/// Note type name to a length in quarter notes.
fn type_quarters(name: &str) -> Option<f64> {
    Some(match name {
        "breve" => 8.0,
        "whole" => 4.0,
        "half" => 2.0,
        "quarter" => 1.0,
        "eighth" => 0.5,
        "16th" => 0.25,
        "32nd" => 0.125,
        "64th" => 0.0625,
        "128th" => 0.03125,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(measures: &str) -> String {
        format!(
            r#"<?xml version="1.0"?>
<score-partwise version="3.1">
  <part-list><score-part id="P1"><part-name>Piano</part-name></score-part></part-list>
  <part id="P1">{measures}</part>
</score-partwise>"#
        )
    }

    fn note(step: &str, octave: i32, dur: u32, extra: &str) -> String {
        format!(
            "<note>{extra}<pitch><step>{step}</step><octave>{octave}</octave></pitch><duration>{dur}</duration><voice>1</voice></note>"
        )
    }

    #[test]
    fn single_quarter_note() {
        let xml = doc(&format!(
            r#"<measure number="1"><attributes><divisions>1</divisions></attributes>{}</measure>"#,
            note("C", 4, 1, "")
        ));
        let s = parse_musicxml(xml.as_bytes()).unwrap();
        assert_eq!(s.ticks_per_quarter, 1);
        assert_eq!(s.voices.len(), 1);
        let f = &s.voices[0].factors;
        assert_eq!(f.len(), 1);
        let Some(Body::Chord(c)) = &f[0].body else { panic!() };
        assert_eq!(c.pitches, vec![Pitch::new(60).unwrap()]);
        assert_eq!(c.value, 1);
    }

    #[test]
    fn trill_mark_becomes_trill() {
        let xml = doc(&r#"<measure number="1"><attributes><divisions>2</divisions></attributes>
            <note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration><voice>1</voice>
            <notations><ornaments><trill-mark/></ornaments></notations></note></measure>"#.to_string());
        let s = parse_musicxml(xml.as_bytes()).unwrap();
        let Some(Body::Chord(c)) = &s.voices[0].factors[0].body else { panic!() };
        let o = c.ornament.as_ref().unwrap();
        assert_eq!(o.kind, OrnamentKind::Trill);
        assert_eq!(o.notes[0].upper.midi(), 62);
    }

    #[test]
    fn malformed_xml_reports_location() {
        match parse_musicxml(b"<score-partwise>\n<part>") {
            Err(Error::Parse { line, .. }) => assert!(line >= 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn timewise_is_unsupported() {
        let r = parse_musicxml(b"<score-timewise/>");
        assert!(matches!(r, Err(Error::Unsupported { .. })));
    }

    #[test]
    fn ties_merge_into_one_chord() {
        let xml = doc(&format!(
            r#"<measure number="1"><attributes><divisions>1</divisions></attributes>{}{}</measure>"#,
            note("C", 4, 2, "").replace("<voice>", "<tie type=\"start\"/><voice>"),
            note("C", 4, 2, "").replace("<voice>", "<tie type=\"stop\"/><voice>"),
        ));
        let s = parse_musicxml(xml.as_bytes()).unwrap();
        assert_eq!(s.voices[0].factors.len(), 1);
        assert_eq!(s.voices[0].factors[0].value(), 4);
    }

    #[test]
    fn lcm_resolution() {
        let xml = r#"<score-partwise><part id="A"><measure number="1"><attributes><divisions>3</divisions></attributes></measure></part>
            <part id="B"><measure number="1"><attributes><divisions>4</divisions></attributes></measure></part></score-partwise>"#;
        let doc = Document::parse(xml).unwrap();
        assert_eq!(global_resolution(doc.root_element()), 12);
    }

    #[test]
    fn override_file() {
        let o = GraceOverrides::parse("# comment\nP1 3 2 after\n").unwrap();
        assert_eq!(o.lookup("P1", "3", 2), Some(GraceKind::AfterNote));
        assert!(GraceOverrides::parse("P1 3 x after").is_err());
    }
}
