//! Plain-text score format, one factor per line:
//!
//! ```text
//! tpq 480
//! tempo 0 120
//! voice <v> time <ticks> [after[*] <chords>] [grace[*] <chords>] body <kind> <pitches> value <ticks>
//!     [scale <name>] [orn <name> <p/u/l,...>] [arp <id> <dir>] [fermata] [cadenza]
//! ```
//!
//! `<chords>` separates chords with `;` and pitches with `,`; a chord may carry an
//! `@<ticks>` nominal value. `-` is the empty pitch list. A `*` after `after` or
//! `grace` marks a group produced by ornament expansion. Body kinds are `chord`,
//! `rest`, `tremolo` (chords separated by `;`), `gliss` (`start;end`) and `none`.

use std::fmt::Write as _;

use super::{
    Arpeggio, ArpeggioDirection, Body, ChordEvent, GlissScale, GlissandoEvent, GraceChord,
    GraceGroup, GraceKind, HomophonicFactor, MetronomeMark, Ornament, OrnamentKind,
    OrnamentedNote, Pitch, PolyphonicScore, RestEvent, Ticks, TremoloEvent, Voice,
};
use crate::error::{Error, Result};

pub fn write_text(score: &PolyphonicScore) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tpq {}", score.ticks_per_quarter);
    for m in &score.metronome {
        let _ = writeln!(out, "tempo {} {}", m.time, m.quarter_bpm);
    }
    for voice in &score.voices {
        for f in &voice.factors {
            let _ = write!(out, "voice {} time {}", voice.name, f.score_time);
            for g in [&f.after, &f.grace] {
                if g.is_empty() {
                    continue;
                }
                let key = match g.kind {
                    GraceKind::AfterNote => "after",
                    GraceKind::ShortAppoggiatura => "grace",
                };
                let star = if g.from_ornament { "*" } else { "" };
                let _ = write!(out, " {key}{star} {}", grace_chords(&g.chords));
            }
            out.push_str(" body ");
            match &f.body {
                None => out.push_str("none"),
                Some(Body::Rest(r)) => {
                    let _ = write!(out, "rest - value {}", r.value);
                    if r.fermata {
                        out.push_str(" fermata");
                    }
                }
                Some(Body::Chord(c)) => {
                    let _ = write!(out, "chord {} value {}", pitch_list(&c.pitches), c.value);
                    if let Some(o) = &c.ornament {
                        let notes: Vec<String> = o
                            .notes
                            .iter()
                            .map(|n| format!("{}/{}/{}", n.principal, n.upper, n.lower))
                            .collect();
                        let _ = write!(out, " orn {} {}", o.kind.name(), notes.join(","));
                    }
                    if let Some(a) = c.arpeggio {
                        let _ = write!(out, " arp {} {}", a.group, a.direction.name());
                    }
                    if c.fermata {
                        out.push_str(" fermata");
                    }
                }
                Some(Body::Tremolo(t)) => {
                    let chords: Vec<String> = t.chords.iter().map(|c| pitch_list(c)).collect();
                    let _ = write!(out, "tremolo {} value {}", chords.join(";"), t.value);
                    if t.fermata {
                        out.push_str(" fermata");
                    }
                }
                Some(Body::Glissando(g)) => {
                    let _ = write!(
                        out,
                        "gliss {};{} value {} scale {}",
                        pitch_list(&g.start),
                        pitch_list(&g.end),
                        g.value,
                        g.scale.name()
                    );
                }
            }
            if f.cadenza {
                out.push_str(" cadenza");
            }
            out.push('\n');
        }
    }
    out
}

fn pitch_list(p: &[Pitch]) -> String {
    if p.is_empty() {
        return "-".into();
    }
    p.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
}

fn grace_chords(chords: &[GraceChord]) -> String {
    chords
        .iter()
        .map(|c| {
            if c.nominal > 0 {
                format!("{}@{}", pitch_list(&c.pitches), c.nominal)
            } else {
                pitch_list(&c.pitches)
            }
        })
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_text(text: &str) -> Result<PolyphonicScore> {
    let mut tpq = None;
    let mut metronome = Vec::new();
    let mut voices: Vec<Voice> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = Tokens {
            it: line.split_whitespace().peekable(),
            line: line_no,
        };
        match tok.next()? {
            "tpq" => tpq = Some(tok.number::<u32>()?),
            "tempo" => metronome.push(MetronomeMark {
                time: tok.number()?,
                quarter_bpm: tok.number()?,
            }),
            "voice" => {
                let name = tok.next()?.to_string();
                let factor = parse_factor(&mut tok)?;
                match voices.iter_mut().find(|v| v.name == name) {
                    Some(v) => v.factors.push(factor),
                    None => voices.push(Voice::new(name, vec![factor])),
                }
            }
            other => return Err(Error::parse(line_no, format!("unknown directive `{other}`"))),
        }
    }
    let tpq = tpq.ok_or_else(|| Error::parse(0, "missing `tpq` line"))?;
    Ok(PolyphonicScore {
        voices,
        ticks_per_quarter: tpq,
        metronome,
    })
}

struct Tokens<'a> {
    it: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.it
            .next()
            .ok_or_else(|| Error::parse(self.line, "unexpected end of line"))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let t = self.next()?;
        if t == word {
            Ok(())
        } else {
            Err(Error::parse(self.line, format!("expected `{word}`, found `{t}`")))
        }
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T> {
        let t = self.next()?;
        t.parse()
            .map_err(|_| Error::parse(self.line, format!("bad number `{t}`")))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, msg)
    }
}

fn parse_factor(tok: &mut Tokens<'_>) -> Result<HomophonicFactor> {
    tok.expect("time")?;
    let score_time: Ticks = tok.number()?;
    let mut after = GraceGroup::empty(GraceKind::AfterNote);
    let mut grace = GraceGroup::empty(GraceKind::ShortAppoggiatura);
    loop {
        let key = tok.next()?;
        let (kind, from_ornament) = match key {
            "after" => (GraceKind::AfterNote, false),
            "after*" => (GraceKind::AfterNote, true),
            "grace" => (GraceKind::ShortAppoggiatura, false),
            "grace*" => (GraceKind::ShortAppoggiatura, true),
            "body" => break,
            other => return Err(tok.err(format!("unexpected `{other}`"))),
        };
        let spec = tok.next()?;
        let chords = parse_grace_chords(tok, spec)?;
        let group = GraceGroup {
            kind,
            chords,
            from_ornament,
        };
        match kind {
            GraceKind::AfterNote => after = group,
            GraceKind::ShortAppoggiatura => grace = group,
        }
    }
    let kind = tok.next()?;
    let mut body = match kind {
        "none" => None,
        "rest" | "chord" | "tremolo" | "gliss" => {
            let pitches = tok.next()?;
            tok.expect("value")?;
            let value: Ticks = tok.number()?;
            Some(match kind {
                "rest" => Body::Rest(RestEvent {
                    value,
                    fermata: false,
                }),
                "chord" => Body::Chord(ChordEvent::new(parse_pitches(tok, pitches)?, value)),
                "tremolo" => Body::Tremolo(TremoloEvent {
                    chords: pitches
                        .split(';')
                        .map(|c| parse_pitches(tok, c))
                        .collect::<Result<_>>()?,
                    value,
                    fermata: false,
                }),
                _ => {
                    let (s, e) = pitches
                        .split_once(';')
                        .ok_or_else(|| tok.err("glissando needs `start;end`"))?;
                    Body::Glissando(GlissandoEvent {
                        start: parse_pitches(tok, s)?,
                        end: parse_pitches(tok, e)?,
                        scale: GlissScale::WhiteKeys,
                        value,
                    })
                }
            })
        }
        other => return Err(tok.err(format!("unknown body kind `{other}`"))),
    };
    let mut cadenza = false;
    while let Some(key) = tok.it.next() {
        match (key, body.as_mut()) {
            ("cadenza", _) => cadenza = true,
            ("fermata", Some(Body::Chord(c))) => c.fermata = true,
            ("fermata", Some(Body::Rest(r))) => r.fermata = true,
            ("fermata", Some(Body::Tremolo(t))) => t.fermata = true,
            ("scale", Some(Body::Glissando(g))) => {
                let name = tok.next()?;
                g.scale = GlissScale::from_name(name)
                    .ok_or_else(|| tok.err(format!("unknown scale `{name}`")))?;
            }
            ("orn", Some(Body::Chord(c))) => {
                let name = tok.next()?;
                let kind = OrnamentKind::from_name(name)
                    .ok_or_else(|| tok.err(format!("unknown ornament `{name}`")))?;
                let notes = tok
                    .next()?
                    .split(',')
                    .map(|n| parse_ornamented(tok, n))
                    .collect::<Result<_>>()?;
                c.ornament = Some(Ornament { kind, notes });
            }
            ("arp", Some(Body::Chord(c))) => {
                let group = tok.number()?;
                let dir = tok.next()?;
                let direction = ArpeggioDirection::from_name(dir)
                    .ok_or_else(|| tok.err(format!("unknown arpeggio direction `{dir}`")))?;
                c.arpeggio = Some(Arpeggio { group, direction });
            }
            (other, _) => return Err(tok.err(format!("unexpected `{other}` for body `{kind}`"))),
        }
    }
    Ok(HomophonicFactor {
        after,
        grace,
        body,
        score_time,
        cadenza,
    })
}

fn parse_pitches(tok: &Tokens<'_>, s: &str) -> Result<Vec<Pitch>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    let v = s
        .split(',')
        .map(|p| {
            let n: i32 = p.parse().map_err(|_| tok.err(format!("bad pitch `{p}`")))?;
            Pitch::new(n).map_err(|e| tok.err(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(super::normalize_pitches(v))
}

fn parse_grace_chords(tok: &Tokens<'_>, s: &str) -> Result<Vec<GraceChord>> {
    s.split(';')
        .map(|c| {
            let (p, nominal) = match c.split_once('@') {
                Some((p, n)) => (p, n.parse().map_err(|_| tok.err(format!("bad value `{n}`")))?),
                None => (c, 0),
            };
            Ok(GraceChord {
                pitches: parse_pitches(tok, p)?,
                nominal,
            })
        })
        .collect()
}

fn parse_ornamented(tok: &Tokens<'_>, s: &str) -> Result<OrnamentedNote> {
    let parts: Vec<&str> = s.split('/').collect();
    if parts.len() != 3 {
        return Err(tok.err(format!("ornament note `{s}` must be principal/upper/lower")));
    }
    let p = |x: &str| -> Result<Pitch> {
        let n: i32 = x.parse().map_err(|_| tok.err(format!("bad pitch `{x}`")))?;
        Pitch::new(n).map_err(|e| tok.err(e.to_string()))
    };
    Ok(OrnamentedNote {
        principal: p(parts[0])?,
        upper: p(parts[1])?,
        lower: p(parts[2])?,
    })
}
