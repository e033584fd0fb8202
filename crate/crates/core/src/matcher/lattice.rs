//! Precomputed transition lists for one Viterbi column update.

use super::MatcherConfig;
use crate::ioi::{DistSpec, IoiMixture};
use crate::model::{floored_ln, truncated_cauchy_pdf, IoiTerm, PerformanceHmm, TopKernel, PITCHES};

/// Number of best exit scores kept for the uniform jump term; more than the width
/// of the excluded neighbourhood.
const KEEP: usize = TopKernel::MAX_FORWARD + TopKernel::MAX_BACKWARD + 2;

#[derive(Clone, Copy, Debug)]
enum Term {
    SelfLoop,
    Immediate,
    Metric { ticks: f64, deviation: f64, stretch: f64 },
    Skip,
    /// Only the insertion path; `log_a` is unused.
    None,
}

#[derive(Clone, Copy, Debug)]
struct Pred {
    from: u32,
    log_a: f64,
    term: Term,
    /// Log-probability of the insertion path to the same state, or minus infinity.
    log_insert: f64,
}

pub(super) struct Lattice {
    preds: Vec<Pred>,
    /// `preds[pred_start[j]..pred_start[j + 1]]` lead into state `j`.
    pred_start: Vec<usize>,
    log_pitch: Vec<f64>,
    log_initial: Vec<f64>,
    log_rho_in: Vec<f64>,
    /// Exit into the uniform jump term, per state.
    log_jump_exit: Vec<f64>,
    top_of: Vec<u32>,
    top_first: Vec<usize>,
    mixtures: Vec<IoiMixture>,
    short_app: DistSpec,
    insertion: DistSpec,
    skip: DistSpec,
    delta: f64,
    tops: usize,
    exits: Vec<(f64, u32)>,
    exit_state: Vec<u32>,
}

impl Lattice {
    pub(super) fn new(hmm: &PerformanceHmm, config: &MatcherConfig) -> Self {
        let n = hmm.state_count();
        let tops = hmm.top_count();
        let kernel = hmm.kernel.with_gamma(config.gamma_bar);
        let mut preds = Vec::new();
        let mut pred_start = Vec::with_capacity(n + 1);
        for (j, sj) in hmm.states.iter().enumerate() {
            pred_start.push(preds.len());
            let lo = sj.top.saturating_sub(TopKernel::MAX_FORWARD);
            let hi = (sj.top + TopKernel::MAX_BACKWARD).min(tops - 1);
            for top in lo..=hi {
                let t = &hmm.tops[top];
                for i in t.first_state..t.first_state + t.len {
                    let terms = hmm.transition_terms(i, j, config.gamma_bar);
                    let mut pred = Pred {
                        from: i as u32,
                        log_a: f64::NEG_INFINITY,
                        term: Term::None,
                        log_insert: f64::NEG_INFINITY,
                    };
                    for (a, _, term) in terms {
                        match term {
                            IoiTerm::Insertion => pred.log_insert = a.ln(),
                            IoiTerm::SelfLoop(_) => (pred.log_a, pred.term) = (a.ln(), Term::SelfLoop),
                            IoiTerm::Immediate => (pred.log_a, pred.term) = (a.ln(), Term::Immediate),
                            IoiTerm::Metric {
                                ticks,
                                deviation,
                                stretch,
                            } => {
                                (pred.log_a, pred.term) = (
                                    a.ln(),
                                    Term::Metric {
                                        ticks,
                                        deviation,
                                        stretch,
                                    },
                                )
                            }
                            IoiTerm::Skip => (pred.log_a, pred.term) = (a.ln(), Term::Skip),
                        }
                    }
                    preds.push(pred);
                }
            }
        }
        pred_start.push(preds.len());
        let log_pitch = hmm
            .states
            .iter()
            .flat_map(|s| s.pitch_dist.iter().map(|p| p.ln()))
            .collect();
        let log_initial = (0..n).map(|j| hmm.initial(j, config.gamma_bar).ln()).collect();
        let log_rho_in = hmm
            .states
            .iter()
            .map(|s| hmm.bottoms[s.top].rho_in[s.sub].ln())
            .collect();
        let uniform: Vec<f64> = (0..tops).map(|t| kernel.row(t, tops).uniform.ln()).collect();
        let log_jump_exit = hmm
            .states
            .iter()
            .map(|s| hmm.bottoms[s.top].rho_out[s.sub].ln() + uniform[s.top])
            .collect();
        Lattice {
            preds,
            pred_start,
            log_pitch,
            log_initial,
            log_rho_in,
            log_jump_exit,
            top_of: hmm.states.iter().map(|s| s.top as u32).collect(),
            top_first: hmm.tops.iter().map(|t| t.first_state).collect(),
            mixtures: hmm.states.iter().map(|s| s.self_ioi.clone()).collect(),
            short_app: hmm.ioi.short_app,
            insertion: hmm.insertion_spec(config.skip_floor),
            skip: hmm.skip_spec(config.skip_floor),
            delta: config.delta,
            tops,
            exits: Vec::with_capacity(tops),
            exit_state: vec![0; tops],
        }
    }

    pub(super) fn initial(&self, pitch: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.log_initial[j] + self.log_pitch[j * PITCHES + pitch];
        }
    }

    /// One Viterbi step from `prev` to `out`, writing the best predecessor of each state to `back`.
    pub(super) fn column(&mut self, prev: &[f64], pitch: usize, dt: f64, tempo: f64, out: &mut [f64], back: &mut [u32]) {
        let ln_short = floored_ln(self.short_app.pdf(dt));
        let ln_insert = floored_ln(self.insertion.pdf(dt));
        let ln_skip = floored_ln(self.skip.pdf(dt));

        // Best exit per event into the uniform jump term, keeping the KEEP largest.
        self.exits.clear();
        for t in 0..self.tops {
            let first = self.top_first[t];
            let last = self.top_first.get(t + 1).copied().unwrap_or(prev.len());
            let mut best = (f64::NEG_INFINITY, first as u32);
            for i in first..last {
                let v = prev[i] + self.log_jump_exit[i];
                if v > best.0 {
                    best = (v, i as u32);
                }
            }
            self.exit_state[t] = best.1;
            self.exits.push((best.0, t as u32));
        }
        let keep = KEEP.min(self.exits.len());
        let order = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if keep < self.exits.len() {
            self.exits.select_nth_unstable_by(keep - 1, order);
            self.exits.truncate(keep);
        }
        self.exits.sort_by(order);

        for j in 0..out.len() {
            let mut best = f64::NEG_INFINITY;
            let mut arg = u32::MAX;
            for p in &self.preds[self.pred_start[j]..self.pred_start[j + 1]] {
                let from = prev[p.from as usize];
                if from == f64::NEG_INFINITY {
                    continue;
                }
                let main = match p.term {
                    Term::None => f64::NEG_INFINITY,
                    Term::SelfLoop => p.log_a + floored_ln(self.mixtures[j].pdf(dt)),
                    Term::Immediate => p.log_a + ln_short,
                    Term::Skip => p.log_a + ln_skip,
                    Term::Metric {
                        ticks,
                        deviation,
                        stretch,
                    } => {
                        let mean = (tempo * ticks + deviation) * stretch;
                        p.log_a + floored_ln(truncated_cauchy_pdf(dt, mean, self.delta * stretch))
                    }
                };
                let trans = if p.log_insert == f64::NEG_INFINITY {
                    main
                } else {
                    crate::model::log_sum_exp(&[main, p.log_insert + ln_insert])
                };
                let v = from + trans;
                if v > best || (v == best && p.from < arg) {
                    best = v;
                    arg = p.from;
                }
            }
            let top = self.top_of[j] as usize;
            let excluded = top.saturating_sub(TopKernel::MAX_FORWARD)..=top + TopKernel::MAX_BACKWARD;
            if let Some(&(exit, t)) = self.exits.iter().find(|(_, t)| !excluded.contains(&(*t as usize))) {
                let v = exit + self.log_rho_in[j] + ln_skip;
                let from = self.exit_state[t as usize];
                if v > best || (v == best && from < arg) {
                    best = v;
                    arg = from;
                }
            }
            out[j] = best + self.log_pitch[j * PITCHES + pitch];
            back[j] = if arg == u32::MAX { 0 } else { arg };
        }
    }
}
