//! Metrics on the string view of a sequence set: novelty, uniqueness,
//! edit-distance diversity and N-gram Jaccard similarity.
//!
//! Membership and distinctness use exact, case-sensitive string equality.
//! Edit distances count Unicode scalar values, not bytes.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Levenshtein distance (unit-cost insertions, deletions and substitutions).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance divided by the longer length; 0 for two empty strings.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    normalized_chars(&a, &b)
}

fn normalized_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        0.0
    } else {
        levenshtein_chars(a, b) as f64 / longest as f64
    }
}

/// Fraction of generated elements whose string is absent from the reference.
pub fn novelty<S: AsRef<str>, R: AsRef<str>>(generated: &[S], reference: &[R]) -> Result<f64> {
    if generated.is_empty() {
        return Err(Error::Empty("novelty needs at least one generated sequence"));
    }
    let known: HashSet<&str> = reference.iter().map(AsRef::as_ref).collect();
    let novel = generated.iter().filter(|s| !known.contains(s.as_ref())).count();
    Ok(novel as f64 / generated.len() as f64)
}

/// Number of distinct strings over the number of elements.
pub fn uniqueness<S: AsRef<str>>(generated: &[S]) -> Result<f64> {
    if generated.is_empty() {
        return Err(Error::Empty("uniqueness needs at least one sequence"));
    }
    let distinct: HashSet<&str> = generated.iter().map(AsRef::as_ref).collect();
    Ok(distinct.len() as f64 / generated.len() as f64)
}

/// Size of the comparison set used for each element by [`diversity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DiversityK {
    /// Compare against every other element.
    #[default]
    Exact,
    /// Compare against `k` others sampled without replacement.
    #[serde(untagged)]
    Sampled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DiversityParams {
    #[serde(default)]
    pub k: DiversityK,
    #[serde(default)]
    pub seed: u64,
}

/// Seed for the per-element sampler: a function of the run seed and the element index only.
pub(crate) fn element_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean normalized Levenshtein distance between each element and the
/// other elements of the set (self excluded).
///
/// With [`DiversityK::Sampled`] each element draws its own comparison set
/// from an RNG seeded by `(seed, index)`, so results do not depend on
/// thread scheduling.
pub fn diversity<S: AsRef<str> + Sync>(generated: &[S], params: DiversityParams) -> Result<f64> {
    let n = generated.len();
    if n < 2 {
        return Err(Error::TooFew {
            what: "diversity",
            needed: 2,
            got: n,
        });
    }
    let chars: Vec<Vec<char>> = generated.iter().map(|s| s.as_ref().chars().collect()).collect();
    let per_element = match params.k {
        DiversityK::Exact => par::map_range(n, |i| {
            let total: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| normalized_chars(&chars[i], &chars[j]))
                .sum();
            total / (n - 1) as f64
        }),
        DiversityK::Sampled(k) => {
            if k == 0 || k > n - 1 {
                return Err(Error::InvalidParameter(format!(
                    "diversity k must lie in 1..={} for a set of {n}, got {k}",
                    n - 1
                )));
            }
            par::map_range(n, |i| {
                let mut rng = ChaCha8Rng::seed_from_u64(element_seed(params.seed, i));
                let total: f64 = rand::seq::index::sample(&mut rng, n - 1, k)
                    .into_iter()
                    .map(|j| if j >= i { j + 1 } else { j })
                    .map(|j| normalized_chars(&chars[i], &chars[j]))
                    .sum();
                total / k as f64
            })
        }
    };
    Ok(per_element.into_iter().sum::<f64>() / n as f64)
}

/// Set of all length-`n` substrings (by characters) of `s`.
pub fn ngrams(s: &str, n: usize) -> HashSet<String> {
    let chars: Vec<char> = s.chars().collect();
    if n == 0 || chars.len() < n {
        return HashSet::new();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramParams {
    pub n: usize,
}

/// Average Jaccard similarity between each generated sequence's N-gram set
/// and the union of the reference N-gram sets.
pub fn ngram_jaccard<S: AsRef<str> + Sync, R: AsRef<str>>(
    generated: &[S],
    reference: &[R],
    params: NgramParams,
) -> Result<f64> {
    if params.n == 0 {
        return Err(Error::InvalidParameter("N-gram length must be at least 1".into()));
    }
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::Empty("N-gram Jaccard needs generated and reference sequences"));
    }
    let mut pool: HashSet<String> = HashSet::new();
    for r in reference {
        pool.extend(ngrams(r.as_ref(), params.n));
    }
    let scores = par::map_slice(generated, |g| {
        let own = ngrams(g.as_ref(), params.n);
        let inter = own.iter().filter(|x| pool.contains(*x)).count();
        let union = own.len() + pool.len() - inter;
        if union == 0 {
            Err(Error::Numerical(format!(
                "N-gram Jaccard is 0/0 for `{}` (no {}-grams on either side)",
                g.as_ref(),
                params.n
            )))
        } else {
            Ok(inter as f64 / union as f64)
        }
    });
    let mut total = 0.0;
    for s in scores {
        total += s?;
    }
    Ok(total / generated.len() as f64)
}
