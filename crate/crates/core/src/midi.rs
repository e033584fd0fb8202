//! Standard MIDI file output of performed notes and onset extraction from MIDI files.

use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};

use crate::error::{Error, Result};
use crate::matcher::NoteEvent;
use crate::score::Pitch;

/// Ticks per quarter note of written files.
pub const MIDI_TPQ: u16 = 480;
pub const VELOCITY: u8 = 80;
/// Sounding length of written notes, seconds.
pub const NOTE_LENGTH: f64 = 0.1;

/// Format-0 file with one note-on/note-off pair per note, constant velocity and a single tempo.
pub fn write_midi(events: &[NoteEvent], seconds_per_quarter: f64) -> Result<Vec<u8>> {
    if events.is_empty() {
        return Err(Error::input("cannot write an empty stream"));
    }
    if !(seconds_per_quarter > 0.0) || seconds_per_quarter > 16.0 {
        return Err(Error::input(format!("bad tempo {seconds_per_quarter} s per quarter")));
    }
    let micros = (seconds_per_quarter * 1e6).round() as u32;
    let tick = seconds_per_quarter / f64::from(MIDI_TPQ);
    let to_tick = |t: f64| (t.max(0.0) / tick).round() as u64;

    // (tick, is_on, pitch); offs sort before ons at the same tick.
    let mut timeline: Vec<(u64, bool, u8)> = Vec::with_capacity(events.len() * 2);
    for (n, e) in events.iter().enumerate() {
        let on = to_tick(e.onset);
        let next_same = events[n + 1..]
            .iter()
            .find(|x| x.pitch == e.pitch)
            .map_or(u64::MAX, |x| to_tick(x.onset));
        let off = to_tick(e.onset + NOTE_LENGTH).min(next_same).max(on);
        timeline.push((on, true, e.pitch.midi()));
        timeline.push((off, false, e.pitch.midi()));
    }
    timeline.sort_by_key(|&(t, on, _)| (t, on));

    let channel = u4::new(0);
    let mut track = vec![TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::Tempo(u24::new(micros))),
    }];
    let mut last = 0u64;
    for (t, on, key) in timeline {
        let delta = u32::try_from(t - last).ok().filter(|d| *d < 1 << 28);
        let delta = delta.ok_or_else(|| Error::Midi("gap between notes too long".into()))?;
        last = t;
        let key = u7::new(key);
        let message = if on {
            MidiMessage::NoteOn {
                key,
                vel: u7::new(VELOCITY),
            }
        } else {
            MidiMessage::NoteOff { key, vel: u7::new(0) }
        };
        track.push(TrackEvent {
            delta: u28::new(delta),
            kind: TrackEventKind::Midi { channel, message },
        });
    }
    track.push(TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
    });
    let mut smf = Smf::new(Header::new(Format::SingleTrack, Timing::Metrical(u15::new(MIDI_TPQ))));
    smf.tracks.push(track);
    let mut out = Vec::new();
    smf.write_std(&mut out)?;
    Ok(out)
}

/// Note-on events with positive velocity, in onset order, with times resolved through the
/// tempo map. Note-offs are ignored.
pub fn read_midi(bytes: &[u8]) -> Result<Vec<NoteEvent>> {
    let smf = Smf::parse(bytes).map_err(|e| Error::Midi(e.to_string()))?;
    // (tick, track, order, Some(pitch) for notes or None with the new tempo)
    let mut items: Vec<(u64, usize, usize, Option<u8>, u32)> = Vec::new();
    for (n, track) in smf.tracks.iter().enumerate() {
        let mut tick = 0u64;
        for (order, ev) in track.iter().enumerate() {
            tick += u64::from(ev.delta.as_int());
            match ev.kind {
                TrackEventKind::Meta(MetaMessage::Tempo(t)) => items.push((tick, n, order, None, t.as_int())),
                TrackEventKind::Midi {
                    message: MidiMessage::NoteOn { key, vel },
                    ..
                } if vel.as_int() > 0 => items.push((tick, n, order, Some(key.as_int()), 0)),
                _ => {}
            }
        }
    }
    // Tempo changes take effect before notes at the same tick.
    items.sort_by_key(|&(tick, track, order, note, _)| (tick, note.is_some(), track, order));

    let seconds_at = |ticks: u64, micros: u32| -> f64 {
        match smf.header.timing {
            Timing::Metrical(tpq) => ticks as f64 * f64::from(micros) * 1e-6 / f64::from(tpq.as_int()),
            Timing::Timecode(fps, sub) => ticks as f64 / (f64::from(fps.as_f32()) * f64::from(sub)),
        }
    };
    let mut micros = 500_000u32;
    let (mut base_tick, mut base_time) = (0u64, 0.0f64);
    let mut events = Vec::new();
    for (tick, _, _, note, tempo) in items {
        let time = base_time + seconds_at(tick - base_tick, micros);
        match note {
            None => {
                (base_tick, base_time, micros) = (tick, time, tempo);
            }
            Some(key) => {
                let pitch = Pitch::new(i32::from(key)).map_err(|e| Error::Midi(e.to_string()))?;
                events.push(NoteEvent::new(events.len(), time, pitch));
            }
        }
    }
    Ok(events)
}
