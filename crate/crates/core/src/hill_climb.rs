//! A deterministic toy design loop used as an iterative-evaluation fixture.
//!
//! Each round every sequence proposes one seeded point mutation and keeps
//! it only if its motif score does not drop, so per-sequence scores (and
//! the hit labels derived from them) never decrease.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::data::{Alphabet, PropertyColumn, PropertyTable, SequenceSet};
use crate::error::Result;
use crate::io::properties;
use crate::representations::PropertyProducer;
use crate::seq_metrics::element_seed;

/// Scores a sequence by how many of its residues are in `residues`; a hit
/// is a score of at least `threshold`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifScore {
    pub residues: String,
    pub threshold: usize,
}

impl MotifScore {
    pub fn score(&self, s: &str) -> usize {
        s.chars().filter(|c| self.residues.contains(*c)).count()
    }
}

impl PropertyProducer for MotifScore {
    fn compute(&self, batch: &[&str]) -> Result<PropertyTable> {
        let scores: Vec<usize> = batch.iter().map(|s| self.score(s)).collect();
        PropertyTable::new(batch.len(), "motif")
            .with_column("score", PropertyColumn::Real(scores.iter().map(|&s| s as f64).collect()))?
            .with_column("hit", PropertyColumn::Binary(scores.iter().map(|&s| s >= self.threshold).collect()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HillClimber {
    pub population: usize,
    pub length: usize,
    pub rounds: usize,
    pub seed: u64,
    pub motif: MotifScore,
}

impl Default for HillClimber {
    fn default() -> Self {
        HillClimber {
            population: 12,
            length: 10,
            rounds: 10,
            seed: 7,
            motif: MotifScore {
                residues: "KR".into(),
                threshold: 3,
            },
        }
    }
}

/// Population snapshot after a round (round 0 is the initial population).
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub index: u64,
    pub sequences: SequenceSet,
}

impl HillClimber {
    pub fn run(&self) -> Vec<Round> {
        let symbols: Vec<char> = Alphabet::Protein.symbols().expect("closed alphabet").chars().collect();
        let mut pop: Vec<Vec<char>> = (0..self.population)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(element_seed(self.seed, i));
                (0..self.length).map(|_| symbols[rng.random_range(0..symbols.len())]).collect()
            })
            .collect();
        let snapshot = |index: u64, pop: &[Vec<char>]| Round {
            index,
            sequences: SequenceSet::new_allow_empty("climber", pop.iter().map(|s| s.iter().collect::<String>())),
        };
        let mut rounds = vec![snapshot(0, &pop)];
        for r in 1..=self.rounds {
            for (i, seq) in pop.iter_mut().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(element_seed(self.seed ^ r as u64, i));
                let pos = rng.random_range(0..seq.len());
                let mut candidate = seq.clone();
                candidate[pos] = symbols[rng.random_range(0..symbols.len())];
                let score = |s: &[char]| self.motif.score(&s.iter().collect::<String>());
                if score(&candidate) >= score(seq) {
                    *seq = candidate;
                }
            }
            rounds.push(snapshot(r as u64, &pop));
        }
        rounds
    }

    /// Writes per-round sequence and property files plus an `iterate`
    /// config (`config.json`) into `dir`.
    pub fn write_fixture(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut iterations = Vec::new();
        for round in self.run() {
            let seq_name = format!("round{}.txt", round.index);
            let prop_name = format!("round{}.props.csv", round.index);
            fs::write(dir.join(&seq_name), crate::io::sequences::write_plain(&round.sequences))?;
            let batch: Vec<&str> = round.sequences.iter().collect();
            let table = self.motif.compute(&batch).map_err(io::Error::other)?;
            fs::write(dir.join(&prop_name), properties::to_csv(&table))?;
            iterations.push(json!({
                "index": round.index,
                "groups": { "climber": seq_name },
                "files": { "motif": { "climber": prop_name } },
            }));
        }
        let config = json!({
            "config_version": 1,
            "representations": { "motif": { "kind": "file", "content": "properties" } },
            "metrics": [
                { "metric": "hit-rate", "params": { "representation": "motif", "column": "hit" }, "name": "Hit-rate" },
                { "metric": "identity", "params": { "representation": "motif", "column": "score" }, "name": "Score" },
                { "metric": "diversity" }
            ],
            "iterations": iterations,
        });
        let mut text = serde_json::to_string_pretty(&config).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(dir.join("config.json"), text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_never_decrease() {
        let hc = HillClimber::default();
        let rounds = hc.run();
        assert_eq!(rounds.len(), hc.rounds + 1);
        for w in rounds.windows(2) {
            for (a, b) in w[0].sequences.iter().zip(w[1].sequences.iter()) {
                assert!(hc.motif.score(b) >= hc.motif.score(a));
            }
        }
        assert_eq!(hc.run(), rounds);
    }
}
