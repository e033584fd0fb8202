//! Per-note alignment records and their TSV form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{StateType, TransitionClass};
use crate::score::{Pitch, Ticks};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedNote {
    pub m: usize,
    pub onset: f64,
    pub pitch: Pitch,
    pub top: usize,
    pub sub: usize,
    pub state_type: StateType,
    pub score_time: Ticks,
    pub class: TransitionClass,
    pub log_odds: f64,
    /// Acceptable `(top, sub)` matches of a note without a definite score note.
    pub candidates: Vec<(usize, usize)>,
}

impl AlignedNote {
    pub fn unmatched(&self) -> bool {
        !self.candidates.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub notes: Vec<AlignedNote>,
}

const HEADER: &str = "m\tonset_s\tpitch\ttop_I\tsub_k\tstate_type\tscore_time_ticks\tclass\tlogodds";

impl Alignment {
    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// One row per note; a tenth `candidates` column is added when any note has candidates.
    pub fn to_tsv(&self) -> String {
        let with_candidates = self.notes.iter().any(AlignedNote::unmatched);
        let mut out = String::from(HEADER);
        if with_candidates {
            out.push_str("\tcandidates");
        }
        out.push('\n');
        for n in &self.notes {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                n.m,
                n.onset,
                n.pitch.midi(),
                n.top,
                n.sub,
                n.state_type.name(),
                n.score_time,
                n.class.name(),
                n.log_odds
            );
            if with_candidates {
                let c: Vec<String> = n.candidates.iter().map(|(i, k)| format!("{i}:{k}")).collect();
                let _ = write!(out, "\t{}", if c.is_empty() { "-".into() } else { c.join(",") });
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut notes = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() || line.starts_with("m\t") {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 9 && f.len() != 10 {
                return Err(Error::parse(line_no, format!("expected 9 or 10 fields, found {}", f.len())));
            }
            let err = |what: &str| Error::parse(line_no, format!("bad {what} `{line}`"));
            let int = |s: &str, what: &str| s.parse::<usize>().map_err(|_| err(what));
            let float = |s: &str, what: &str| s.parse::<f64>().map_err(|_| err(what));
            let candidates = match f.get(9) {
                None | Some(&"-") | Some(&"") => Vec::new(),
                Some(c) => c
                    .split(',')
                    .map(|x| {
                        let (i, k) = x.split_once(':').ok_or_else(|| err("candidate"))?;
                        Ok((int(i, "candidate")?, int(k, "candidate")?))
                    })
                    .collect::<Result<_>>()?,
            };
            notes.push(AlignedNote {
                m: int(f[0], "note index")?,
                onset: float(f[1], "onset")?,
                pitch: Pitch::new(f[2].parse::<i32>().map_err(|_| err("pitch"))?)
                    .map_err(|_| err("pitch"))?,
                top: int(f[3], "top index")?,
                sub: int(f[4], "sub index")?,
                state_type: StateType::from_name(f[5]).ok_or_else(|| err("state type"))?,
                score_time: f[6].parse().map_err(|_| err("score time"))?,
                class: TransitionClass::from_name(f[7]).ok_or_else(|| err("class"))?,
                log_odds: float(f[8], "log-odds")?,
                candidates,
            });
        }
        Ok(Alignment { notes })
    }
}
