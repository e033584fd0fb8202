//! Note-level and score-time-level error rates between two alignments.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matcher::{AlignedNote, Alignment};
use crate::model::{StateType, TransitionClass};

fn check_indices(pred: &Alignment, truth: &Alignment) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::input(format!(
            "alignment lengths differ: {} predicted, {} true",
            pred.len(),
            truth.len()
        )));
    }
    if let Some((p, t)) = pred.notes.iter().zip(&truth.notes).find(|(p, t)| p.m != t.m) {
        return Err(Error::input(format!("note index mismatch: {} vs {}", p.m, t.m)));
    }
    Ok(())
}

fn note_correct(p: &AlignedNote, t: &AlignedNote) -> bool {
    (p.top, p.sub) == (t.top, t.sub) || t.candidates.contains(&(p.top, p.sub))
}

fn scoretime_correct(p: &AlignedNote, t: &AlignedNote) -> bool {
    p.score_time == t.score_time || note_correct(p, t)
}

fn percent(wrong: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * wrong as f64 / total as f64
    }
}

/// Percentage of notes assigned to a different (event, sub-state) than the truth.
/// A truth note with candidates counts as correct when the prediction is any candidate.
pub fn note_error_rate(pred: &Alignment, truth: &Alignment) -> Result<f64> {
    check_indices(pred, truth)?;
    let wrong = pred.notes.iter().zip(&truth.notes).filter(|(p, t)| !note_correct(p, t)).count();
    Ok(percent(wrong, truth.len()))
}

/// Percentage of notes assigned to a different score time than the truth.
pub fn scoretime_error_rate(pred: &Alignment, truth: &Alignment) -> Result<f64> {
    check_indices(pred, truth)?;
    let wrong = pred.notes.iter().zip(&truth.notes).filter(|(p, t)| !scoretime_correct(p, t)).count();
    Ok(percent(wrong, truth.len()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub piece: String,
    pub onsets: usize,
    pub note_error: f64,
    pub scoretime_error: f64,
    /// Note-level error among truth notes of each state type; `None` when there are none.
    pub ch_error: Option<f64>,
    pub sa_error: Option<f64>,
    pub tr_error: Option<f64>,
    /// Number of truth repeats and skips.
    pub skip_episodes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub aggregate: ReportRow,
}

#[derive(Default)]
struct Counts {
    onsets: usize,
    note_wrong: usize,
    time_wrong: usize,
    by_type: [(usize, usize); 3],
    skips: usize,
}

impl Counts {
    fn add(&mut self, pred: &Alignment, truth: &Alignment) {
        for (p, t) in pred.notes.iter().zip(&truth.notes) {
            self.onsets += 1;
            let ok = note_correct(p, t);
            self.note_wrong += usize::from(!ok);
            self.time_wrong += usize::from(!scoretime_correct(p, t));
            let slot = match t.state_type {
                StateType::Ch => 0,
                StateType::Sa => 1,
                StateType::Tr => 2,
            };
            self.by_type[slot].0 += 1;
            self.by_type[slot].1 += usize::from(!ok);
            self.skips += usize::from(t.class == TransitionClass::Skip);
        }
    }

    fn row(&self, piece: &str) -> ReportRow {
        let typed = |(n, w): (usize, usize)| (n > 0).then(|| percent(w, n));
        ReportRow {
            piece: piece.to_string(),
            onsets: self.onsets,
            note_error: percent(self.note_wrong, self.onsets),
            scoretime_error: percent(self.time_wrong, self.onsets),
            ch_error: typed(self.by_type[0]),
            sa_error: typed(self.by_type[1]),
            tr_error: typed(self.by_type[2]),
            skip_episodes: self.skips,
        }
    }
}

pub const AGGREGATE: &str = "ALL";
const HEADER: &str = "piece\tonsets\tnote_err\tscoretime_err\tch_err\tsa_err\ttr_err\tskip_episodes";

/// Per-piece rows and a pooled aggregate over all notes.
pub fn report(corpus: &[(String, Alignment, Alignment)]) -> Result<EvalReport> {
    if corpus.is_empty() {
        return Err(Error::input("empty corpus"));
    }
    let mut total = Counts::default();
    let mut rows = Vec::with_capacity(corpus.len());
    for (piece, pred, truth) in corpus {
        check_indices(pred, truth)?;
        let mut c = Counts::default();
        c.add(pred, truth);
        total.add(pred, truth);
        rows.push(c.row(piece));
    }
    Ok(EvalReport {
        rows,
        aggregate: total.row(AGGREGATE),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl EvalReport {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for r in self.rows.iter().chain(std::iter::once(&self.aggregate)) {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.piece,
                r.onsets,
                r.note_error,
                r.scoretime_error,
                opt(r.ch_error),
                opt(r.sa_error),
                opt(r.tr_error),
                r.skip_episodes
            );
        }
        out
    }

    /// Parses a report; the last row is the aggregate.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with("piece\t") {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 8 {
                return Err(Error::parse(n + 1, format!("expected 8 fields, found {}", f.len())));
            }
            let err = || Error::parse(n + 1, format!("bad row `{line}`"));
            let num = |s: &str| s.parse::<f64>().map_err(|_| err());
            let opt = |s: &str| if s == "-" { Ok(None) } else { num(s).map(Some) };
            rows.push(ReportRow {
                piece: f[0].to_string(),
                onsets: f[1].parse().map_err(|_| err())?,
                note_error: num(f[2])?,
                scoretime_error: num(f[3])?,
                ch_error: opt(f[4])?,
                sa_error: opt(f[5])?,
                tr_error: opt(f[6])?,
                skip_episodes: f[7].parse().map_err(|_| err())?,
            });
        }
        let aggregate = rows.pop().ok_or_else(|| Error::input("report has no rows"))?;
        Ok(EvalReport { rows, aggregate })
    }
}
