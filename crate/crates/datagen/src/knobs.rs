//! Per-prompt diversity knobs.
//!
//! Each knob is drawn by inverse-CDF over a fixed ordering of its values, one uniform draw per
//! knob in the order `num_sentences`, `difficulty`, `avoid_first_sentence`, so a seed pins the
//! whole sequence.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumSentences {
    Unspecified,
    Two,
    Five,
    Ten,
    Fifteen,
}

impl NumSentences {
    pub const ALL: [NumSentences; 5] = [
        NumSentences::Unspecified,
        NumSentences::Two,
        NumSentences::Five,
        NumSentences::Ten,
        NumSentences::Fifteen,
    ];
    pub const PROBABILITIES: [f64; 5] = [0.5, 0.1, 0.2, 0.1, 0.1];

    pub fn count(self) -> Option<u32> {
        match self {
            NumSentences::Unspecified => None,
            NumSentences::Two => Some(2),
            NumSentences::Five => Some(5),
            NumSentences::Ten => Some(10),
            NumSentences::Fifteen => Some(15),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Unspecified,
    HighSchool,
    College,
    Phd,
}

impl Difficulty {
    pub const ALL: [Difficulty; 4] = [
        Difficulty::Unspecified,
        Difficulty::HighSchool,
        Difficulty::College,
        Difficulty::Phd,
    ];
    pub const PROBABILITIES: [f64; 4] = [0.4, 0.2, 0.2, 0.2];

    /// Reader level as it appears in the prompt.
    pub fn label(self) -> Option<&'static str> {
        match self {
            Difficulty::Unspecified => None,
            Difficulty::HighSchool => Some("high school"),
            Difficulty::College => Some("college"),
            Difficulty::Phd => Some("PhD"),
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label().unwrap_or("none"))
    }
}

pub const AVOID_FIRST_SENTENCE_PROBABILITY: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptKnobs {
    pub num_sentences: NumSentences,
    pub difficulty: Difficulty,
    pub avoid_first_sentence: bool,
}

impl PromptKnobs {
    /// No optional clause at all.
    pub const PLAIN: PromptKnobs = PromptKnobs {
        num_sentences: NumSentences::Unspecified,
        difficulty: Difficulty::Unspecified,
        avoid_first_sentence: false,
    };
}

/// Index of the first cumulative probability strictly above `u`.
fn inverse_cdf(probabilities: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // rounding can leave the total a hair below 1
    probabilities.len() - 1
}

pub fn sample_knobs<R: Rng + ?Sized>(rng: &mut R) -> PromptKnobs {
    let u_len: f64 = rng.random();
    let u_diff: f64 = rng.random();
    let u_first: f64 = rng.random();
    PromptKnobs {
        num_sentences: NumSentences::ALL[inverse_cdf(&NumSentences::PROBABILITIES, u_len)],
        difficulty: Difficulty::ALL[inverse_cdf(&Difficulty::PROBABILITIES, u_diff)],
        avoid_first_sentence: u_first < AVOID_FIRST_SENTENCE_PROBABILITY,
    }
}
