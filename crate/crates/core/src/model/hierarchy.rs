//! Two-level transition structure and its expansion into a flat HMM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-9;

/// Self-transition probability giving `n_e` expected emissions.
pub fn self_transition_from_expected(n_e: f64) -> Result<f64> {
    if !(n_e >= 1.0) || !n_e.is_finite() {
        return Err(Error::InvalidModel(format!("expected note count {n_e} is below one")));
    }
    Ok(1.0 - 1.0 / n_e)
}

/// Expected notes of a trill: notes per repetition times the number of repetitions
/// fitting into `value` ticks at `tempo` seconds per tick.
pub fn trill_expected_notes(notes_per_repetition: f64, tempo: f64, value: f64, period: f64) -> Result<f64> {
    let args = [notes_per_repetition, tempo, value, period];
    if args.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidModel(format!("trill parameters must be positive: {args:?}")));
    }
    Ok(notes_per_repetition * tempo * value / period)
}

/// Entering, inter-state and exiting probabilities of one top-level state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BottomParams {
    pub rho_in: Vec<f64>,
    /// Row-major `len × len` matrix.
    pub rho: Vec<f64>,
    pub rho_out: Vec<f64>,
}

impl BottomParams {
    /// Left-to-right chain with the given self-transition probabilities.
    pub fn chain(self_probs: &[f64]) -> Self {
        let n = self_probs.len();
        let mut rho_in = vec![0.0; n];
        if n == 1 {
            rho_in[0] = 1.0;
        } else if n > 1 {
            rho_in[0] = 0.9;
            for r in &mut rho_in[1..] {
                *r = 0.1 / (n - 1) as f64;
            }
        }
        let mut rho = vec![0.0; n * n];
        let mut rho_out = vec![0.0; n];
        for (k, &s) in self_probs.iter().enumerate() {
            rho[k * n + k] = s;
            let leave = 1.0 - s;
            if k + 1 == n {
                rho_out[k] = leave;
                continue;
            }
            rho[k * n + k + 1] = 0.9 * leave;
            let share = 0.1 * leave / (n - k - 1) as f64;
            for l in k + 2..n {
                rho[k * n + l] = share;
            }
            rho_out[k] = share;
        }
        BottomParams { rho_in, rho, rho_out }
    }

    pub fn len(&self) -> usize {
        self.rho_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_in.is_empty()
    }

    pub fn at(&self, k: usize, l: usize) -> f64 {
        self.rho[k * self.len() + l]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 || self.rho.len() != n * n || self.rho_out.len() != n {
            return Err(Error::InvalidModel("bottom parameter shapes disagree".into()));
        }
        let all = self.rho_in.iter().chain(&self.rho).chain(&self.rho_out);
        if all.clone().any(|x| !(*x >= 0.0 && *x <= 1.0 + STOCHASTIC_TOL)) {
            return Err(Error::InvalidModel("bottom probability outside [0, 1]".into()));
        }
        if (self.rho_in.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidModel("entering probabilities do not sum to one".into()));
        }
        for k in 0..n {
            let s: f64 = self.rho[k * n..(k + 1) * n].iter().sum::<f64>() + self.rho_out[k];
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidModel(format!("bottom row {k} sums to {s}")));
            }
        }
        Ok(())
    }
}

/// One row of the top-level transition matrix: explicit neighbourhood entries plus
/// a uniform value for every other state.
#[derive(Clone, Debug, PartialEq)]
pub struct TopRow {
    pub window: Vec<(usize, f64)>,
    pub uniform: f64,
}

impl TopRow {
    pub fn prob(&self, j: usize) -> f64 {
        self.window
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(self.uniform, |(_, p)| *p)
    }
}

/// Event-level transitions: small forward and backward moves with fixed weights and
/// uniform mass `gamma_bar` for every other jump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopKernel {
    pub self_weight: f64,
    /// Weights of moves by +1 ..= +4 events.
    pub forward: [f64; 4],
    /// Weights of moves by -1 and -2 events.
    pub backward: [f64; 2],
    pub gamma_bar: f64,
}

impl Default for TopKernel {
    fn default() -> Self {
        TopKernel {
            self_weight: 0.01,
            forward: [0.95, 0.025, 0.008, 0.002],
            backward: [0.003, 0.002],
            gamma_bar: (-40.0f64).exp(),
        }
    }
}

impl TopKernel {
    pub const MAX_FORWARD: usize = 4;
    pub const MAX_BACKWARD: usize = 2;

    pub fn with_gamma(self, gamma_bar: f64) -> Self {
        TopKernel { gamma_bar, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.forward.iter().chain(&self.backward).chain([&self.self_weight]);
        if w.clone().any(|x| !(*x >= 0.0) || !x.is_finite()) || w.sum::<f64>() <= 0.0 {
            return Err(Error::InvalidModel("kernel weights must be non-negative".into()));
        }
        if !(self.gamma_bar > 0.0 && self.gamma_bar < 1.0) {
            return Err(Error::InvalidModel(format!("gamma_bar {} outside (0, 1)", self.gamma_bar)));
        }
        Ok(())
    }

    fn finish(&self, mut window: Vec<(usize, f64)>, n: usize) -> TopRow {
        let total: f64 = window.iter().map(|(_, w)| w).sum();
        let rest = n - window.len();
        let (scale, uniform) = if rest > 0 {
            ((1.0 - self.gamma_bar) / total, self.gamma_bar / rest as f64)
        } else {
            (1.0 / total, 0.0)
        };
        for e in &mut window {
            e.1 *= scale;
        }
        TopRow { window, uniform }
    }

    /// Row `i` of an `n`-state top matrix.
    pub fn row(&self, i: usize, n: usize) -> TopRow {
        let mut window = Vec::with_capacity(7);
        for (d, &w) in self.backward.iter().enumerate().rev() {
            if let Some(j) = i.checked_sub(d + 1) {
                window.push((j, w));
            }
        }
        window.push((i, self.self_weight));
        for (d, &w) in self.forward.iter().enumerate() {
            if i + d + 1 < n {
                window.push((i + d + 1, w));
            }
        }
        self.finish(window, n)
    }

    /// Distribution of the first event, as a forward move from before the start.
    pub fn initial_row(&self, n: usize) -> TopRow {
        let window = self.forward.iter().enumerate().take(n).map(|(j, &w)| (j, w)).collect();
        self.finish(window, n)
    }

    pub fn prob(&self, i: usize, j: usize, n: usize) -> f64 {
        self.row(i, n).prob(j)
    }

    /// Dense matrix; for tests and small models only.
    pub fn dense(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let r = self.row(i, n);
                (0..n).map(|j| r.prob(j)).collect()
            })
            .collect()
    }
}

/// Flat transition matrix `a[(I,k)][(J,l)]` of the expanded HMM, states ordered by
/// top index then sub-index.
pub fn expand_hierarchical(top: &[Vec<f64>], bottoms: &[BottomParams]) -> Result<Vec<Vec<f64>>> {
    let n = top.len();
    if bottoms.len() != n {
        return Err(Error::InvalidModel(format!("{} bottom models for {n} top states", bottoms.len())));
    }
    for (i, row) in top.iter().enumerate() {
        if row.len() != n || row.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidModel(format!("top row {i} malformed")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidModel(format!("top row {i} sums to {s}")));
        }
    }
    for b in bottoms {
        b.validate()?;
    }
    let offsets: Vec<usize> = bottoms
        .iter()
        .scan(0, |acc, b| {
            let o = *acc;
            *acc += b.len();
            Some(o)
        })
        .collect();
    let total: usize = bottoms.iter().map(BottomParams::len).sum();
    let mut a = vec![vec![0.0; total]; total];
    for (ti, bi) in bottoms.iter().enumerate() {
        for k in 0..bi.len() {
            let row = &mut a[offsets[ti] + k];
            for (tj, bj) in bottoms.iter().enumerate() {
                let exit = bi.rho_out[k] * top[ti][tj];
                for l in 0..bj.len() {
                    let mut v = exit * bj.rho_in[l];
                    if ti == tj {
                        v += bi.at(k, l);
                    }
                    row[offsets[tj] + l] = v;
                }
            }
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_transition_values() {
        assert_eq!(self_transition_from_expected(1.0).unwrap(), 0.0);
        assert!((self_transition_from_expected(3.1).unwrap() - 0.67742).abs() < 1e-5);
        assert!((self_transition_from_expected(1.1).unwrap() - 0.09091).abs() < 1e-5);
        assert!(self_transition_from_expected(0.5).is_err());
    }

    #[test]
    fn trill_notes() {
        let v = 1.0 / 480.0;
        assert!((trill_expected_notes(2.0, v, 480.0, 0.17).unwrap() - 11.7647).abs() < 1e-3);
        assert!((trill_expected_notes(2.0, v, 0.17 * 480.0, 0.17).unwrap() - 2.0).abs() < 1e-12);
        assert!((trill_expected_notes(4.0, v, 240.0, 0.17).unwrap() - 11.7647).abs() < 1e-3);
        assert!(trill_expected_notes(0.0, v, 240.0, 0.17).is_err());
    }

    #[test]
    fn chain_rows_are_stochastic() {
        for n in 1..6 {
            let s: Vec<f64> = (0..n).map(|k| 0.1 * k as f64).collect();
            let b = BottomParams::chain(&s);
            b.validate().unwrap();
            if n > 2 {
                assert!((b.at(0, 1) - 0.9).abs() < 1e-12);
                assert!((b.at(0, 2) - b.rho_out[0]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hand_evaluated_entries() {
        // I != J: 0.3 * 0.2 * 0.9; I == J adds rho_kl.
        let bi = BottomParams {
            rho_in: vec![0.9, 0.1],
            rho: vec![0.2, 0.5, 0.0, 0.7],
            rho_out: vec![0.3, 0.3],
        };
        let top = vec![vec![0.1, 0.9], vec![0.2, 0.8]];
        let a = expand_hierarchical(&top, &[bi.clone(), bi]).unwrap();
        assert!((a[2][0] - 0.054).abs() < 1e-15);
        assert!((a[0][1] - (0.5 + 0.3 * 0.1 * 0.1)).abs() < 1e-15);
        let bj = BottomParams {
            rho_in: vec![0.1, 0.9],
            rho: vec![0.2, 0.5, 0.0, 0.7],
            rho_out: vec![0.3, 0.3],
        };
        let a = expand_hierarchical(&top, &[bj.clone(), bj]).unwrap();
        assert!((a[0][1] - 0.527).abs() < 1e-15);
    }

    #[test]
    fn kernel_rows_sum_to_one() {
        let k = TopKernel::default().with_gamma(1e-3);
        for n in [1, 2, 3, 5, 8, 20] {
            for i in 0..n {
                let r = k.row(i, n);
                let s: f64 = r.window.iter().map(|x| x.1).sum::<f64>() + r.uniform * (n - r.window.len()) as f64;
                assert!((s - 1.0).abs() < 1e-12, "n={n} i={i} s={s}");
            }
            let r = k.initial_row(n);
            let s: f64 = r.window.iter().map(|x| x.1).sum::<f64>() + r.uniform * (n - r.window.len()) as f64;
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(expand_hierarchical(&[vec![0.5]], &[BottomParams::chain(&[0.0])]).is_err());
    }
}
