//! Goodness of fit of the sampled prompt knobs.

use gradrank_datagen::knobs::AVOID_FIRST_SENTENCE_PROBABILITY;
use gradrank_datagen::{sample_knobs, Difficulty, NumSentences};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DRAWS: usize = 100_000;
const ALPHA: f64 = 0.001;

/// Pearson statistic and its critical value at `ALPHA`.
fn chi_square(observed: &[usize], probabilities: &[f64]) -> (f64, f64) {
    let n = observed.iter().sum::<usize>() as f64;
    let stat = observed
        .iter()
        .zip(probabilities)
        .map(|(&o, &p)| (o as f64 - n * p).powi(2) / (n * p))
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    (stat, dist.inverse_cdf(1.0 - ALPHA))
}

#[test]
fn knob_marginals_fit_their_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut lengths = [0usize; 5];
    let mut levels = [0usize; 4];
    let mut avoid = [0usize; 2];
    for _ in 0..DRAWS {
        let k = sample_knobs(&mut rng);
        lengths[NumSentences::ALL.iter().position(|&v| v == k.num_sentences).unwrap()] += 1;
        levels[Difficulty::ALL.iter().position(|&v| v == k.difficulty).unwrap()] += 1;
        avoid[usize::from(k.avoid_first_sentence)] += 1;
    }
    let p = AVOID_FIRST_SENTENCE_PROBABILITY;
    for (name, observed, probs) in [
        ("length", &lengths[..], &NumSentences::PROBABILITIES[..]),
        ("difficulty", &levels[..], &Difficulty::PROBABILITIES[..]),
        ("first sentence", &avoid[..], &[1.0 - p, p][..]),
    ] {
        let (stat, critical) = chi_square(observed, probs);
        assert!(stat < critical, "{name}: statistic {stat:.3} exceeds {critical:.3}");
    }
}

#[test]
fn skewed_counts_are_rejected() {
    // sanity check on the test statistic itself
    let (stat, critical) = chi_square(&[52_000, 10_000, 18_000, 10_000, 10_000], &NumSentences::PROBABILITIES);
    assert!(stat > critical);
}
