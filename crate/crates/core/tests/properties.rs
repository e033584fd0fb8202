use proptest::prelude::*;

use scorealign::eval::{note_error_rate, scoretime_error_rate};
use scorealign::homophonize::{homophonize, signature};
use scorealign::ioi::{DistSpec, Family};
use scorealign::matcher::{align, MatcherConfig};
use scorealign::model::{expand_hierarchical, BottomParams, ModelConfig, PerformanceHmm};
use scorealign::score::{parse_text, synth, write_text};
use scorealign::simulate::{simulate, SimConfig};
use scorealign::tempo::{TempoParams, TempoState};

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn stochastic(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(normalized)
}

fn bottom() -> impl Strategy<Value = BottomParams> {
    (1usize..4).prop_flat_map(|k| {
        (stochastic(k), prop::collection::vec(stochastic(k + 1), k)).prop_map(move |(rho_in, rows)| BottomParams {
            rho_in,
            rho: rows.iter().flat_map(|r| r[..k].to_vec()).collect(),
            rho_out: rows.iter().map(|r| r[k]).collect(),
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn text_format_round_trips(events in 1usize..60, seed in any::<u64>()) {
        let score = synth::ornament_dense(events, seed);
        prop_assert_eq!(parse_text(&write_text(&score)).unwrap(), score);
    }

    #[test]
    fn homophonization_is_valid_and_idempotent(events in 1usize..60, seed in any::<u64>()) {
        let h1 = homophonize(&synth::ornament_dense(events, seed)).unwrap();
        prop_assert!(h1.check_invariants().is_ok());
        let h2 = homophonize(&h1.to_single_voice()).unwrap();
        prop_assert_eq!(signature(&h1), signature(&h2));
    }

    #[test]
    fn expanded_rows_are_stochastic(
        (top, bottoms) in (1usize..5).prop_flat_map(|n| (prop::collection::vec(stochastic(n), n), prop::collection::vec(bottom(), n)))
    ) {
        let a = expand_hierarchical(&top, &bottoms).unwrap();
        for row in &a {
            prop_assert!(row.iter().all(|&x| x >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn samples_respect_support(family in 0usize..3, loc in 0.0f64..0.2, width in 0.005f64..0.1, seed in any::<u64>()) {
        let family = [Family::Gaussian, Family::Cauchy, Family::HalfExponential][family];
        let width = if family == Family::HalfExponential { 1.0 / width } else { width };
        let spec = DistSpec::new(family, loc, width).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        for _ in 0..50 {
            let x = spec.sample(&mut rng);
            prop_assert!(x >= spec.lower());
            prop_assert!(spec.pdf(x) >= 0.0);
        }
        prop_assert_eq!(spec.pdf(spec.lower() - 1.0), 0.0);
    }

    #[test]
    fn tempo_estimate_stays_in_bounds(dts in prop::collection::vec(1e-4f64..5.0, 1..40)) {
        let p = TempoParams::new(0.5 / 480.0, 480);
        let (lo, hi) = p.bounds();
        let mut s = TempoState::init(&p).unwrap();
        for dt in dts {
            s = s.step(480.0, 480.0, dt, &p).unwrap();
            let v = s.estimate(&p);
            prop_assert!(v >= lo && v <= hi && s.variance > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn alignment_is_total_and_scoretime_error_bounded(events in 5usize..40, seed in any::<u64>(), sim_seed in any::<u64>()) {
        let hmm = PerformanceHmm::compile(&synth::ornament_dense(events, seed), &ModelConfig::default()).unwrap();
        let sim = simulate(&hmm, &SimConfig { seed: sim_seed, ..SimConfig::default().scaled_mistakes(4.0) }).unwrap();
        prop_assume!(!sim.events.is_empty());
        let r = align(&hmm, &sim.events, MatcherConfig::offline()).unwrap();
        prop_assert_eq!(r.alignment.len(), sim.events.len());
        prop_assert!(r.path.iter().all(|&j| j < hmm.state_count()));
        let note = note_error_rate(&r.alignment, &sim.truth).unwrap();
        let time = scoretime_error_rate(&r.alignment, &sim.truth).unwrap();
        prop_assert!(time <= note);
    }
}
