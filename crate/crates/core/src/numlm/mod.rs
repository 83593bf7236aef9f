//! A small conditional autoregressive model over decimal digit tokens.
//!
//! Cardinalities are written most-significant digit first and terminated by
//! `STOP`. The model encodes a prompt's feature vector once and then predicts
//! one token per step, conditioned on the previous token and its position.
//! Training maximizes the log-likelihood of the target tokens under teacher
//! forcing, summed over every example of every dataset handed in.

mod features;
mod model;
mod train;

pub use features::{featurize, FeatureLayout, FeatureVector, MAX_ESTIMATES, MAX_FILTERS, MAX_TABLES};
pub use model::{Decoded, DecodeMode, DigitModel, Gradients, MAX_STEPS};
pub use train::{grad_check, mean_nll, train, Example, GradCheck, Hyper, Optimizer, TrainReport};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vocabulary: ten digits, `STOP`, `PAD`.
pub const VOCAB: usize = 12;
/// Longest digit string the model may emit.
pub const MAX_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DigitToken {
    Digit(u8),
    Stop,
    Pad,
}

impl DigitToken {
    pub fn index(self) -> usize {
        match self {
            DigitToken::Digit(d) => d as usize,
            DigitToken::Stop => 10,
            DigitToken::Pad => 11,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            0..=9 => DigitToken::Digit(i as u8),
            10 => DigitToken::Stop,
            _ => DigitToken::Pad,
        }
    }
}

impl fmt::Display for DigitToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DigitToken::Digit(d) => write!(f, "{d}"),
            DigitToken::Stop => f.write_str("<stop>"),
            DigitToken::Pad => f.write_str("<pad>"),
        }
    }
}

/// Decimal digits of `c`, most significant first, followed by `STOP`.
pub fn tokenize_cardinality(c: u64) -> Vec<DigitToken> {
    let mut digits: Vec<DigitToken> = Vec::new();
    let mut v = c;
    loop {
        digits.push(DigitToken::Digit((v % 10) as u8));
        v /= 10;
        if v == 0 {
            break;
        }
    }
    digits.reverse();
    digits.push(DigitToken::Stop);
    digits
}

/// Inverse of [`tokenize_cardinality`]; anything it could not have produced
/// is rejected.
pub fn detokenize(seq: &[DigitToken]) -> Result<u64> {
    let malformed = |why: &str| Err(Error::MalformedDigits(why.into()));
    let Some((DigitToken::Stop, digits)) = seq.split_last() else {
        return malformed("missing STOP");
    };
    if digits.is_empty() {
        return malformed("no digits");
    }
    if digits.len() > MAX_DIGITS {
        return malformed("more than 12 digits");
    }
    if digits.len() > 1 && digits[0] == DigitToken::Digit(0) {
        return malformed("leading zero");
    }
    let mut v: u64 = 0;
    for t in digits {
        match t {
            DigitToken::Digit(d) => v = v * 10 + *d as u64,
            DigitToken::Stop => return malformed("STOP before the end"),
            DigitToken::Pad => return malformed("PAD token"),
        }
    }
    Ok(v)
}

/// Text form of a generated sequence: digits verbatim, other tokens in angle
/// brackets, `STOP` at the end dropped.
pub fn render_tokens(seq: &[DigitToken]) -> String {
    use core::fmt::Write as _;
    let body = match seq.split_last() {
        Some((DigitToken::Stop, rest)) => rest,
        _ => seq,
    };
    let mut s = String::new();
    for t in body {
        let _ = write!(s, "{t}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use DigitToken::*;

    #[test]
    fn tokenizes_examples() {
        assert_eq!(tokenize_cardinality(21), vec![Digit(2), Digit(1), Stop]);
        assert_eq!(tokenize_cardinality(0), vec![Digit(0), Stop]);
        assert_eq!(tokenize_cardinality(16), vec![Digit(1), Digit(6), Stop]);
        assert_eq!(detokenize(&[Digit(1), Digit(6), Stop]), Ok(16));
    }

    #[test]
    fn rejects_malformed() {
        assert!(detokenize(&[Stop]).is_err());
        assert!(detokenize(&[Digit(1)]).is_err());
        assert!(detokenize(&[Digit(1), Pad, Stop]).is_err());
        assert!(detokenize(&[Digit(0), Digit(1), Stop]).is_err());
        assert!(detokenize(&[Digit(1), Stop, Digit(1), Stop]).is_err());
        let long: Vec<DigitToken> = core::iter::repeat(Digit(9)).take(13).chain([Stop]).collect();
        assert!(detokenize(&long).is_err());
        assert_eq!(render_tokens(&[Digit(4), Pad, Stop]), "4<pad>");
    }

    #[test]
    fn vocabulary_has_twelve_tokens() {
        let all: Vec<DigitToken> = (0..VOCAB).map(DigitToken::from_index).collect();
        assert!(all.iter().enumerate().all(|(i, t)| t.index() == i));
        assert_eq!(all.len(), 12);
    }

    proptest! {
        #[test]
        fn round_trip(c in 0u64..=1_000_000) {
            prop_assert_eq!(detokenize(&tokenize_cardinality(c)), Ok(c));
        }

        #[test]
        fn round_trip_wide(c in 0u64..=999_999_999_999) {
            prop_assert_eq!(detokenize(&tokenize_cardinality(c)), Ok(c));
        }
    }
}
