//! Inter-onset-interval densities on the half-line and their mixtures.

mod fit;
mod params;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{fit_distribution, fit_report_tsv, read_samples, Bins, FamilyFit, FitResult};
pub use params::{default_params, parse_params, write_params, IoiParams, DEFAULT_PARAMS_TEXT, REQUIRED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    HalfExponential,
    Cauchy,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::HalfExponential, Family::Cauchy];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::HalfExponential => "half_exponential",
            Family::Cauchy => "cauchy",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// A location-width family restricted to `[floor, inf)` (or `[0, inf)`) and renormalized.
///
/// `width` is the standard deviation for the Gaussian, the rate for the
/// half-exponential and the half width at half maximum for the Cauchy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub family: Family,
    pub location: f64,
    pub width: f64,
    pub floor: Option<f64>,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

impl DistSpec {
    pub fn new(family: Family, location: f64, width: f64) -> Result<Self> {
        Self::with_floor(family, location, width, None)
    }

    pub fn with_floor(family: Family, location: f64, width: f64, floor: Option<f64>) -> Result<Self> {
        let spec = DistSpec {
            family,
            location,
            width,
            floor,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(mean: f64, sd: f64) -> Self {
        DistSpec::new(Family::Gaussian, mean, sd).expect("valid gaussian")
    }

    pub fn half_exponential(rate: f64) -> Self {
        DistSpec::new(Family::HalfExponential, 0.0, rate).expect("valid half-exponential")
    }

    pub fn cauchy(location: f64, hwhm: f64) -> Self {
        DistSpec::new(Family::Cauchy, location, hwhm).expect("valid cauchy")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) || !self.location.is_finite() {
            return Err(Error::input(format!("bad {} parameters", self.family.name())));
        }
        if let Some(f) = self.floor {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::input("truncation floor must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Lower end of the support.
    pub fn lower(&self) -> f64 {
        let base = self.floor.unwrap_or(0.0).max(0.0);
        match self.family {
            Family::HalfExponential => base.max(self.location),
            _ => base,
        }
    }

    /// Cumulative distribution of the untruncated family.
    fn raw_cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.width;
        match self.family {
            Family::Gaussian => std_normal_cdf(z),
            Family::Cauchy => 0.5 + z.atan() / PI,
            Family::HalfExponential => {
                if x <= self.location {
                    0.0
                } else {
                    -(-self.width * (x - self.location)).exp_m1()
                }
            }
        }
    }

    fn raw_pdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.width;
        match self.family {
            Family::Gaussian => (-0.5 * z * z).exp() / (self.width * (2.0 * PI).sqrt()),
            Family::Cauchy => 1.0 / (PI * self.width * (1.0 + z * z)),
            Family::HalfExponential => {
                if x < self.location {
                    0.0
                } else {
                    self.width * (-self.width * (x - self.location)).exp()
                }
            }
        }
    }

    /// Mass of the untruncated family above the support's lower end.
    fn tail_mass(&self) -> f64 {
        let lo = self.lower();
        match self.family {
            Family::Gaussian => 0.5 * libm::erfc((lo - self.location) / self.width * FRAC_1_SQRT_2),
            Family::Cauchy => 0.5 - ((lo - self.location) / self.width).atan() / PI,
            Family::HalfExponential => (-self.width * (lo - self.location)).exp(),
        }
    }

    /// Density without the sign check; zero below the support.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lower() {
            return 0.0;
        }
        self.raw_pdf(x) / self.tail_mass()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let lo = self.lower();
        if x <= lo {
            return 0.0;
        }
        match self.family {
            Family::Gaussian => {
                let hi = 0.5 * libm::erfc((x - self.location) / self.width * FRAC_1_SQRT_2);
                (1.0 - hi / self.tail_mass()).clamp(0.0, 1.0)
            }
            _ => ((self.raw_cdf(x) - self.raw_cdf(lo)) / self.tail_mass()).clamp(0.0, 1.0),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let lo = self.lower();
        match self.family {
            Family::HalfExponential => lo - (-u).ln_1p() / self.width,
            Family::Cauchy => {
                let a = self.raw_cdf(lo);
                let v = a + u * (1.0 - a);
                self.location + self.width * (PI * (v - 0.5)).tan()
            }
            Family::Gaussian => {
                let (mut a, mut b) = (lo, lo.max(self.location) + 40.0 * self.width);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if self.cdf(m) < u {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                0.5 * (a + b)
            }
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let lo = self.lower();
        match self.family {
            Family::HalfExponential => lo + Exp::new(self.width).expect("positive rate").sample(rng),
            Family::Cauchy => self.quantile(rng.gen::<f64>()),
            Family::Gaussian => {
                let n = Normal::new(self.location, self.width).expect("positive sd");
                if self.tail_mass() > 0.05 {
                    loop {
                        let x = n.sample(rng);
                        if x >= lo {
                            return x;
                        }
                    }
                }
                self.quantile(rng.gen::<f64>())
            }
        }
    }

    /// Copy with all time quantities multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let width = match self.family {
            Family::HalfExponential => self.width / c,
            _ => self.width * c,
        };
        DistSpec {
            family: self.family,
            location: self.location * c,
            width,
            floor: self.floor.map(|f| f * c),
        }
    }
}

/// Density at `dt`; negative intervals are rejected.
pub fn eval_pdf(spec: &DistSpec, dt: f64) -> Result<f64> {
    if dt < 0.0 || dt.is_nan() {
        return Err(Error::input(format!("negative inter-onset interval {dt}")));
    }
    Ok(spec.pdf(dt))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IoiLabel {
    Chord,
    ShortApp,
    Arpeggio,
    Trill,
}

impl IoiLabel {
    pub fn name(self) -> &'static str {
        match self {
            IoiLabel::Chord => "chord",
            IoiLabel::ShortApp => "short_app",
            IoiLabel::Arpeggio => "arpeggio",
            IoiLabel::Trill => "trill",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoiComponent {
    pub label: IoiLabel,
    pub weight: f64,
    pub spec: DistSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoiMixture {
    pub components: Vec<IoiComponent>,
}

impl IoiMixture {
    /// Normalizes the weights; components with zero weight are dropped.
    pub fn new(components: Vec<IoiComponent>) -> Result<Self> {
        if components.iter().any(|c| !(c.weight >= 0.0) || !c.weight.is_finite()) {
            return Err(Error::input("mixture weights must be non-negative"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if total <= 0.0 {
            return Err(Error::input("mixture needs a positive weight"));
        }
        for c in &components {
            c.spec.validate()?;
        }
        Ok(IoiMixture {
            components: components
                .into_iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| IoiComponent {
                    weight: c.weight / total,
                    ..c
                })
                .collect(),
        })
    }

    pub fn single(label: IoiLabel, spec: DistSpec) -> Self {
        IoiMixture {
            components: vec![IoiComponent {
                label,
                weight: 1.0,
                spec,
            }],
        }
    }

    pub fn weight(&self, label: IoiLabel) -> f64 {
        self.components
            .iter()
            .filter(|c| c.label == label)
            .map(|c| c.weight)
            .sum()
    }

    pub fn pdf(&self, dt: f64) -> f64 {
        self.components.iter().map(|c| c.weight * c.spec.pdf(dt)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.gen();
        for c in &self.components {
            if u < c.weight {
                return c.spec.sample(rng);
            }
            u -= c.weight;
        }
        self.components.last().expect("non-empty mixture").spec.sample(rng)
    }
}

pub fn mixture_pdf(mix: &IoiMixture, dt: f64) -> Result<f64> {
    if dt < 0.0 || dt.is_nan() {
        return Err(Error::input(format!("negative inter-onset interval {dt}")));
    }
    Ok(mix.pdf(dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_at_zero() {
        let g = 0.04;
        let d = DistSpec::cauchy(0.0, g);
        assert!((eval_pdf(&d, 0.0).unwrap() - 2.0 / (PI * g)).abs() < 1e-12);
    }

    #[test]
    fn half_exponential_definition() {
        let d = DistSpec::half_exponential(14.0);
        for x in [0.0, 0.01, 0.3] {
            assert!((d.pdf(x) - 14.0 * (-14.0 * x).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn floor_truncates() {
        let d = DistSpec::with_floor(Family::Cauchy, 0.0, 1.0, Some(0.3)).unwrap();
        assert_eq!(eval_pdf(&d, 0.1).unwrap(), 0.0);
        assert!(d.pdf(0.31) > 0.0);
    }

    #[test]
    fn negative_dt_rejected() {
        assert!(eval_pdf(&DistSpec::gaussian(0.1, 0.02), -0.01).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for d in [
            DistSpec::gaussian(0.085, 0.02),
            DistSpec::half_exponential(30.0),
            DistSpec::with_floor(Family::Cauchy, 0.0, 1.0, Some(0.3)).unwrap(),
        ] {
            for u in [0.1, 0.5, 0.9] {
                assert!((d.cdf(d.quantile(u)) - u).abs() < 1e-9, "{d:?} {u}");
            }
        }
    }

    #[test]
    fn mixture_is_weighted_sum() {
        let a = DistSpec::gaussian(0.1, 0.03);
        let b = DistSpec::cauchy(0.0, 0.05);
        let m = IoiMixture::new(vec![
            IoiComponent { label: IoiLabel::Chord, weight: 1.0, spec: a },
            IoiComponent { label: IoiLabel::Trill, weight: 1.0, spec: b },
        ])
        .unwrap();
        let x = 0.07;
        assert!((mixture_pdf(&m, x).unwrap() - 0.5 * (a.pdf(x) + b.pdf(x))).abs() < 1e-12);
        assert!(IoiMixture::new(vec![]).is_err());
    }
}
