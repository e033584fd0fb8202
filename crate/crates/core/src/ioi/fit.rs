//! Histogram least-squares fitting of the three IOI families.

use std::fmt::Write as _;

use super::{DistSpec, Family};
use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 50;
const MAX_BINS: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bins {
    FreedmanDiaconis,
    Count(usize),
    Width(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyFit {
    pub spec: DistSpec,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub best: DistSpec,
    pub fits: Vec<FamilyFit>,
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] * (1.0 - frac) + v[i + 1] * frac
    } else {
        v[i]
    }
}

struct Histogram {
    edges: Vec<f64>,
    density: Vec<f64>,
}

fn histogram(sorted: &[f64], bins: Bins) -> Result<Histogram> {
    let n = sorted.len() as f64;
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    if !(iqr > 0.0) {
        return Err(Error::DegenerateSamples("interquartile range is zero".into()));
    }
    // The far tail of heavy-tailed samples only adds empty bins.
    let hi = quantile_sorted(sorted, 0.99);
    let width = match bins {
        Bins::FreedmanDiaconis => 2.0 * iqr / n.cbrt(),
        Bins::Count(k) => hi / k.max(1) as f64,
        Bins::Width(w) if w > 0.0 => w,
        Bins::Width(_) => return Err(Error::input("bin width must be positive")),
    };
    let count = ((hi / width).ceil() as usize).clamp(1, MAX_BINS);
    let edges: Vec<f64> = (0..=count).map(|k| k as f64 * width).collect();
    let mut counts = vec![0usize; count];
    for &x in sorted {
        let k = (x / width).floor() as usize;
        if k < count {
            counts[k] += 1;
        }
    }
    let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    Ok(Histogram { edges, density })
}

/// Mean model density per bin, from the cumulative distribution.
fn model_bins(spec: &DistSpec, edges: &[f64]) -> Vec<f64> {
    edges
        .windows(2)
        .map(|w| (spec.cdf(w[1]) - spec.cdf(w[0])) / (w[1] - w[0]))
        .collect()
}

fn sse(h: &Histogram, spec: &DistSpec) -> f64 {
    model_bins(spec, &h.edges)
        .iter()
        .zip(&h.density)
        .map(|(m, d)| (m - d) * (m - d))
        .sum()
}

fn r_squared(h: &Histogram, spec: &DistSpec) -> f64 {
    let mean = h.density.iter().sum::<f64>() / h.density.len() as f64;
    let tot: f64 = h.density.iter().map(|d| (d - mean) * (d - mean)).sum();
    if tot == 0.0 {
        return 0.0;
    }
    1.0 - sse(h, spec) / tot
}

/// Nelder-Mead minimization in two dimensions.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: [f64; 2]) -> [f64; 2] {
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut values = simplex.map(&f);
    for _ in 0..2000 {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let [b, m, w] = order;
        let spread = (values[w] - values[b]).abs();
        if spread <= 1e-14 * values[b].abs().max(1e-300) {
            break;
        }
        let centroid = [
            0.5 * (simplex[b][0] + simplex[m][0]),
            0.5 * (simplex[b][1] + simplex[m][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[w][0] - centroid[0]),
                centroid[1] + t * (simplex[w][1] - centroid[1]),
            ]
        };
        let r = along(-1.0);
        let fr = f(r);
        if fr < values[b] {
            let e = along(-2.0);
            let fe = f(e);
            if fe < fr {
                simplex[w] = e;
                values[w] = fe;
            } else {
                simplex[w] = r;
                values[w] = fr;
            }
        } else if fr < values[m] {
            simplex[w] = r;
            values[w] = fr;
        } else {
            let c = if fr < values[w] { along(-0.5) } else { along(0.5) };
            let fc = f(c);
            if fc < values[w].min(fr) {
                simplex[w] = c;
                values[w] = fc;
            } else {
                for k in [m, w] {
                    simplex[k] = [
                        simplex[b][0] + 0.5 * (simplex[k][0] - simplex[b][0]),
                        simplex[b][1] + 0.5 * (simplex[k][1] - simplex[b][1]),
                    ];
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    let mut best = 0;
    for k in 1..3 {
        if values[k] < values[best] {
            best = k;
        }
    }
    simplex[best]
}

fn fit_family(h: &Histogram, sorted: &[f64], family: Family) -> FamilyFit {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    let median = quantile_sorted(sorted, 0.5);
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spec = match family {
        Family::HalfExponential => {
            let scale = mean.max(iqr);
            let objective = |p: [f64; 2]| sse(h, &DistSpec::half_exponential((-p[0]).exp() / scale));
            let best = nelder_mead(objective, [0.0, 0.0], [0.3, 0.3]);
            DistSpec::half_exponential((-best[0]).exp() / scale)
        }
        Family::Gaussian | Family::Cauchy => {
            let (loc0, width0) = if family == Family::Gaussian {
                (mean, sd.max(iqr / 1.349))
            } else {
                (median, iqr / 2.0)
            };
            // Keeping the mode inside the support stops a far-left Gaussian from mimicking an exponential.
            let make = |p: [f64; 2]| DistSpec {
                family,
                location: (loc0 + p[0] * width0).max(0.0),
                width: width0 * p[1].exp(),
                floor: None,
            };
            let best = nelder_mead(|p| sse(h, &make(p)), [0.0, 0.0], [0.2, 0.2]);
            make(best)
        }
    };
    FamilyFit {
        spec,
        r_squared: r_squared(h, &spec),
    }
}

/// Fits every family to the histogram of `samples` and returns the one with the largest R².
pub fn fit_distribution(samples: &[f64], bins: Bins) -> Result<FitResult> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::input(format!(
            "{} samples given, at least {MIN_SAMPLES} required",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::input("samples must be finite and non-negative"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = histogram(&sorted, bins)?;
    let fits: Vec<FamilyFit> = Family::ALL.iter().map(|&f| fit_family(&h, &sorted, f)).collect();
    let best = fits
        .iter()
        .max_by(|a, b| a.r_squared.total_cmp(&b.r_squared))
        .expect("three families")
        .spec;
    Ok(FitResult { best, fits })
}

/// One row per family: `family location width r_squared best`.
pub fn fit_report_tsv(result: &FitResult) -> String {
    let mut out = String::from("family\tlocation\twidth\tr_squared\tbest\n");
    for f in &result.fits {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            f.spec.family.name(),
            f.spec.location,
            f.spec.width,
            f.r_squared,
            u8::from(f.spec == result.best)
        );
    }
    out
}

/// Reads IOI samples: the last whitespace-separated field of each non-comment line.
pub fn read_samples(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split_whitespace().last().unwrap_or_default();
        match field.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if out.is_empty() && n == 0 => continue,
            Err(_) => return Err(Error::parse(n + 1, format!("bad sample `{field}`"))),
        }
    }
    Ok(out)
}
