//! Two equivalent readings of a timed HMM: a time-dependent transition density with a
//! time-dependent pitch output, and a transition probability with a joint
//! (pitch, IOI) output.

use rand::Rng;

use crate::error::{Error, Result};

/// Small timed model with `a'_ij(s) = w_ij l_ij exp(-l_ij s)` and
/// `b'_ij(p; s) = (1 - g(s)) low_j(p) + g(s) high_j(p)`, `g(s) = s / (s + knee)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedModel {
    pub weights: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
    pub low: Vec<Vec<f64>>,
    pub high: Vec<Vec<f64>>,
    pub knee: f64,
}

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

impl TimedModel {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, states: usize, pitches: usize) -> Self {
        TimedModel {
            weights: (0..states).map(|_| random_simplex(rng, states)).collect(),
            rates: (0..states)
                .map(|_| (0..states).map(|_| rng.gen_range(0.5..20.0)).collect())
                .collect(),
            low: (0..states).map(|_| random_simplex(rng, pitches)).collect(),
            high: (0..states).map(|_| random_simplex(rng, pitches)).collect(),
            knee: rng.gen_range(0.05..0.5),
        }
    }

    /// Chain that always moves to the next state and emits pitch `j` from state `j`.
    pub fn deterministic(states: usize) -> Self {
        let onehot = |j: usize| (0..states).map(|p| f64::from(p == j)).collect::<Vec<_>>();
        TimedModel {
            weights: (0..states).map(|i| onehot((i + 1) % states)).collect(),
            rates: vec![vec![2.0; states]; states],
            low: (0..states).map(onehot).collect(),
            high: (0..states).map(onehot).collect(),
            knee: 0.1,
        }
    }

    pub fn states(&self) -> usize {
        self.weights.len()
    }

    pub fn a_prime(&self, i: usize, j: usize, s: f64) -> f64 {
        let l = self.rates[i][j];
        self.weights[i][j] * l * (-l * s).exp()
    }

    pub fn b_prime(&self, j: usize, p: usize, s: f64) -> f64 {
        let g = s / (s + self.knee);
        (1.0 - g) * self.low[j][p] + g * self.high[j][p]
    }

    /// Transition probability as the integral of the transition density over all IOIs.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        // s = x / (1 - x) maps [0, 1) onto [0, inf).
        let f = |x: f64| {
            if x >= 1.0 {
                return 0.0;
            }
            let s = x / (1.0 - x);
            self.a_prime(i, j, s) / ((1.0 - x) * (1.0 - x))
        };
        adaptive_simpson(&f, 0.0, 1.0, 1e-15, 60)
    }

    pub fn b(&self, i: usize, j: usize, p: usize, s: f64) -> f64 {
        self.a_prime(i, j, s) * self.b_prime(j, p, s) / self.a(i, j)
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    simpson_step(f, a, fa, b, fb, m, fm, whole, tol, depth)
}

/// Log-likelihood of a path starting in `start` with observed `(state, onset, pitch)`
/// triples, evaluated as `prod a'(dt) b'(p; dt)` and as `prod a b(p, dt)`.
pub fn loglik_equivalence_check(model: &TimedModel, start: (usize, f64), events: &[(usize, f64, usize)]) -> Result<(f64, f64)> {
    let n = model.states();
    let (mut prev, mut t) = start;
    let (mut former, mut latter) = (0.0, 0.0);
    for &(j, onset, p) in events {
        if j >= n || prev >= n || p >= model.low[j].len() {
            return Err(Error::input("state or pitch index out of range"));
        }
        let dt = onset - t;
        if !(dt >= 0.0) {
            return Err(Error::OutOfOrder { onset, previous: t });
        }
        former += (model.a_prime(prev, j, dt) * model.b_prime(j, p, dt)).ln();
        latter += model.a(prev, j).ln() + model.b(prev, j, p, dt).ln();
        prev = j;
        t = onset;
    }
    Ok((former, latter))
}
