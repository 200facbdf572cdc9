//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use seqeval::diagnostics::{
    knn_feature_alignment, pca_project, spearman_alignment, spearman_rho, SpearmanAlignmentParams,
};
use seqeval::embed_metrics::{
    authenticity, fbd, improved_precision, improved_recall, mmd, sqrt_product_trace, vendi_exact, vendi_fkea,
    Bandwidth, FkeaParams, KernelSpec,
};
use seqeval::engine::{
    evaluate, evaluate_iterations, fold_partition, fold_wrap, Direction, Iteration, IterationSeries, Metric,
    MetricValue, NoRepresentations, Sample,
};
use seqeval::hill_climb::HillClimber;
use seqeval::io::{embeddings, properties, sequences};
use seqeval::linalg::matrix_sqrt_psd;
use seqeval::prop_metrics::{
    conformity_score, convex_hull_volume, hit_rate, hypervolume_indicator, identity_stat, kl_divergence_categorical,
    kl_divergence_continuous, threshold_fraction, ConformityMeasure, ConformityParams, KdeLogLikelihood, KdeParams,
    Side,
};
use seqeval::report::{self, ChartKind, ChartSpec, TableFormat};
use seqeval::representations::EmbeddingProducer;
use seqeval::seq_metrics::{diversity, levenshtein, ngram_jaccard, novelty, uniqueness, DiversityK, DiversityParams, NgramParams};
use seqeval::{
    kmer_embed, length_property, Cache, EmbeddingMatrix, KmerSpec, MetricKind, Representations, Result, SequenceSet,
    StandardMetric,
};

type Outcome = std::result::Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!("{} (line {})", stringify!($cond), line!()));
        }
    };
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!("{} (line {})", format!($($fmt)+), line!()));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn col(v: &[f64]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_column(v, "col").unwrap()
}

fn rows1(v: &[f64]) -> Vec<Vec<f64>> {
    v.iter().map(|&x| vec![x]).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> EmbeddingMatrix {
    let data = (0..n * d).map(|_| shift + normal(rng)).collect();
    EmbeddingMatrix::new(n, d, data, "gaussian").unwrap()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn set(name: &str, seqs: &[&str]) -> SequenceSet {
    SequenceSet::new(name, seqs.iter().copied()).unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

// ---------------------------------------------------------------------------
// oracles

/// Full dynamic-programming edit distance.
fn lev_table(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in t[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            t[i][j] = (t[i - 1][j] + 1).min(t[i][j - 1] + 1).min(t[i - 1][j - 1] + cost);
        }
    }
    t[a.len()][b.len()]
}

/// Self-exclusive all-pairs mean of normalized edit distance.
fn brute_diversity(g: &[String]) -> f64 {
    let n = g.len();
    let mut outer = 0.0;
    for i in 0..n {
        let mut inner = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            let longest = g[i].chars().count().max(g[j].chars().count());
            inner += if longest == 0 { 0.0 } else { lev_table(&g[i], &g[j]) as f64 / longest as f64 };
        }
        outer += inner / (n - 1) as f64;
    }
    outer / n as f64
}

fn rbf(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    (-sq(a, b) / (2.0 * sigma * sigma)).exp()
}

/// Unbiased MMD² written as explicit loops over all index pairs.
fn mmd_four_loops(x: &EmbeddingMatrix, y: &EmbeddingMatrix, sigma: f64) -> f64 {
    let (n, m) = (x.rows(), y.rows());
    let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                xx += rbf(x.row(i), x.row(j), sigma);
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            if i != j {
                yy += rbf(y.row(i), y.row(j), sigma);
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            xy += rbf(x.row(i), y.row(j), sigma);
        }
    }
    let (n, m) = (n as f64, m as f64);
    xx / (n * (n - 1.0)) + yy / (m * (m - 1.0)) - 2.0 * xy / (n * m)
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    a.transpose() * &a + DMatrix::identity(d, d) * 0.1
}

/// tr((AB)^{1/2}) from the eigenvalues of the non-symmetric product.
fn raw_sqrt_trace(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a * b).complex_eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).sum()
}

/// Monte-Carlo hypervolume against the origin with its standard error.
fn hypervolume_mc(points: &[Vec<f64>], samples: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let k = points[0].len();
    let upper: Vec<f64> = (0..k).map(|c| points.iter().map(|p| p[c]).fold(0.0, f64::max)).collect();
    let box_volume: f64 = upper.iter().product();
    let mut q = vec![0.0; k];
    let mut inside = 0usize;
    for _ in 0..samples {
        for (qc, &u) in q.iter_mut().zip(&upper) {
            *qc = rng.random_range(0.0..u);
        }
        if points.iter().any(|p| p.iter().zip(&q).all(|(a, b)| b <= a)) {
            inside += 1;
        }
    }
    let p = inside as f64 / samples as f64;
    (box_volume * p, box_volume * (p * (1.0 - p) / samples as f64).sqrt())
}

/// A query lies outside a planar hull iff the directions to the points leave a gap wider than π.
fn inside_hull_2d(points: &[Vec<f64>], q: [f64; 2]) -> bool {
    let mut angles: Vec<f64> = points.iter().map(|p| (p[1] - q[1]).atan2(p[0] - q[0])).collect();
    angles.sort_by(f64::total_cmp);
    let mut widest = angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        widest = widest.max(w[1] - w[0]);
    }
    widest <= std::f64::consts::PI
}

/// Scores each point by its first coordinate.
struct Value;

impl ConformityMeasure for Value {
    fn scores(&self, _train: &[Vec<f64>], evaluate: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(evaluate.iter().map(|p| p[0]).collect())
    }
}

struct Constant(f64);

impl Metric for Constant {
    fn name(&self) -> &str {
        "Constant"
    }
    fn direction(&self) -> Direction {
        Direction::Maximize
    }
    fn compute(&self, _: &Sample<'_>) -> Result<MetricValue> {
        Ok(MetricValue::scalar(self.0))
    }
}

struct Counting(AtomicUsize);

impl EmbeddingProducer for Counting {
    fn embed(&self, batch: &[&str]) -> Result<Vec<Vec<f64>>> {
        self.0.fetch_add(batch.len(), Ordering::SeqCst);
        Ok(batch
            .iter()
            .map(|s| {
                let b = s.as_bytes();
                vec![b.len() as f64, b.iter().map(|&c| c as f64).sum::<f64>() / 100.0, b[0] as f64 / 10.0]
            })
            .collect())
    }
}

fn seqeval_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_seqeval"))
        .args(args)
        .env_remove("SEQEVAL_CACHE_DIR")
        .output()
        .expect("failed to launch seqeval")
}

// ---------------------------------------------------------------------------
// golden examples, grouped by module

fn golden_seq_metrics() -> Outcome {
    ensure!(lev_table("kitten", "sitting") == 3);
    ensure!(levenshtein("kitten", "sitting") == 3);
    ensure!(levenshtein("GFGD", "GFGD") == 0);
    ensure!(levenshtein("", "abc") == 3);

    ensure!(novelty(&["A", "B"], &["B"]).unwrap() == 0.5);
    ensure!(novelty(&["A", "B"], &["B", "A", "C"]).unwrap() == 0.0);
    ensure!(novelty(&["A", "A"], &["A"]).unwrap() == 0.0);
    ensure!(novelty::<&str, &str>(&[], &["A"]).is_err());

    ensure!(uniqueness(&["A", "A", "B"]).unwrap() == 2.0 / 3.0);
    ensure!(uniqueness(&["A", "B", "C"]).unwrap() == 1.0);
    ensure!(uniqueness(&["Q"; 5]).unwrap() == 1.0 / 5.0);
    ensure!(uniqueness::<&str>(&[]).is_err());

    let exact = DiversityParams::default();
    ensure!(diversity(&["GFGD"; 4], exact).unwrap() == 0.0);
    ensure!(diversity(&["AB", "CD"], exact).unwrap() == 1.0);
    ensure!(diversity(&["AB"], exact).is_err());
    let too_many = DiversityParams { k: DiversityK::Sampled(3), seed: 0 };
    ensure!(diversity(&["A", "B", "C"], too_many).is_err());

    let ng = |n| NgramParams { n };
    ensure!(ngram_jaccard(&["ABCD"], &["ABX"], ng(2)).unwrap() == 0.25);
    ensure!(ngram_jaccard(&["ABCD"], &["ABCD"], ng(2)).unwrap() == 1.0);
    ensure!(ngram_jaccard(&["AA"], &["A"], ng(1)).unwrap() == 1.0);
    Ok(())
}

fn golden_embed_metrics() -> Outcome {
    let id = DMatrix::<f64>::identity(3, 3);
    ensure!((matrix_sqrt_psd(&id).unwrap() - &id).norm() < 1e-12);
    let r = matrix_sqrt_psd(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]))).unwrap();
    ensure!(close(r[(0, 0)], 2.0, 1e-12) && close(r[(1, 1)], 3.0, 1e-12) && r[(0, 1)].abs() < 1e-12);
    ensure!(matrix_sqrt_psd(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = gaussian(&mut rng, 40, 3, 0.0);
    ensure!(fbd(&x, &x).unwrap().abs() < 1e-8);
    ensure!(close(fbd(&col(&[-1.0, 1.0]), &col(&[0.0, 2.0])).unwrap(), 1.0, 1e-8));
    ensure!(fbd(&col(&[1.0]), &col(&[0.0, 2.0])).is_err());

    let z = col(&[0.0, 0.0]);
    ensure!(mmd(&z, &z, KernelSpec::rbf(0.7)).unwrap().abs() < 1e-12);
    for sigma in [0.3f64, 1.0, 2.5] {
        let want = 2.0 - 2.0 * (-1.0 / (2.0 * sigma * sigma)).exp();
        ensure!(close(mmd(&z, &col(&[1.0, 1.0]), KernelSpec::rbf(sigma)).unwrap(), want, 1e-8));
    }
    ensure!(mmd(&z, &z, KernelSpec::default()).is_err());

    let r = col(&[0.0, 1.0, 10.0]);
    ensure!(improved_precision(&x, &x, 3).unwrap() == 1.0);
    ensure!(improved_precision(&col(&[20.0]), &r, 1).unwrap() == 0.0);
    ensure!(improved_precision(&col(&[0.5]), &r, 1).unwrap() == 1.0);
    ensure!(improved_precision(&col(&[0.5]), &r, 3).is_err());
    ensure!(improved_recall(&x, &x, 3).unwrap() == 1.0);
    let tight: Vec<[f64; 2]> = (0..20)
        .map(|_| [100.0 + rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01)])
        .collect();
    let spread: Vec<[f64; 2]> = (0..20).map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
    let tight = EmbeddingMatrix::from_rows(&tight, "tight").unwrap();
    let spread = EmbeddingMatrix::from_rows(&spread, "spread").unwrap();
    ensure!(improved_recall(&tight, &spread, 3).unwrap() == 0.0);

    ensure!(authenticity(&col(&[0.5]), &col(&[0.0, 0.1, 1.0])).unwrap() == 1.0);
    ensure!(authenticity(&col(&[0.4]), &col(&[0.0, 1.0])).unwrap() == 0.0);
    let copy = EmbeddingMatrix::from_rows(&[x.row(4)], "copy").unwrap();
    ensure!(authenticity(&copy, &x).unwrap() == 0.0);
    ensure!(authenticity(&copy, &col(&[0.0])).is_err());

    let same = EmbeddingMatrix::from_rows(&[[1.0, 2.0, 3.0]; 7], "same").unwrap();
    ensure!(close(vendi_exact(&same, KernelSpec::rbf(1.0)).unwrap(), 1.0, 1e-8));
    let far: Vec<[f64; 2]> = (0..6).map(|i| [10.0 * i as f64, 0.0]).collect();
    let far = EmbeddingMatrix::from_rows(&far, "far").unwrap();
    ensure!(close(vendi_exact(&far, KernelSpec::rbf(0.5)).unwrap(), 6.0, 1e-6));
    let clusters: Vec<[f64; 2]> = (0..20)
        .map(|i| {
            let c = if i < 10 { 0.0 } else { 100.0 };
            [c + rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3)]
        })
        .collect();
    let clusters = EmbeddingMatrix::from_rows(&clusters, "clusters").unwrap();
    ensure!(close(vendi_exact(&clusters, KernelSpec::rbf(1.0)).unwrap(), 2.0, 1e-3));

    for m in [1, 4, 64] {
        let p = FkeaParams { num_features: m, sigma: Bandwidth::Fixed(1.0), ..FkeaParams::default() };
        ensure!(close(vendi_fkea(&same, p).unwrap(), 1.0, 1e-9));
    }
    ensure!(vendi_fkea(&same, FkeaParams { renyi_alpha: 0.0, ..FkeaParams::default() }).is_err());
    Ok(())
}

fn golden_prop_metrics() -> Outcome {
    let (m, v) = identity_stat(&[1.0, 2.0, 3.0]).unwrap();
    ensure!(close(m, 2.0, 1e-12) && close(v, 2.0 / 3.0, 1e-12));
    ensure!(identity_stat(&[4.5; 6]).unwrap() == (4.5, 0.0));
    ensure!(identity_stat(&[7.0]).unwrap() == (7.0, 0.0));
    ensure!(identity_stat(&[]).is_err());

    ensure!(threshold_fraction(&[0.2, 0.8], 0.5, Side::Above).unwrap() == 0.5);
    ensure!(threshold_fraction(&[0.5; 3], 0.5, Side::Above).unwrap() == 0.0);
    ensure!(threshold_fraction(&[1.0, 2.0, 3.0, 4.0], 2.0, Side::Below).unwrap() == 0.25);
    ensure!(threshold_fraction(&[], 0.5, Side::Above).is_err());

    ensure!(hit_rate(&[1.0, 0.0, 1.0, 1.0]).unwrap() == 0.75);
    ensure!(hit_rate(&[0.0; 4]).unwrap() == 0.0);
    ensure!(hit_rate(&[1.0; 4]).unwrap() == 1.0);
    ensure!(hit_rate(&[1.0, 2.0]).is_err());

    ensure!(hypervolume_indicator(&[vec![1.0, 1.0]], Some(&[0.0, 0.0])).unwrap() == 1.0);
    let two = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
    ensure!(hypervolume_indicator(&two, Some(&[0.0, 0.0])).unwrap() == 3.0);
    let mut three = two.clone();
    three.push(vec![0.5, 0.5]);
    ensure!(hypervolume_indicator(&three, Some(&[0.0, 0.0])).unwrap() == 3.0);
    ensure!(hypervolume_indicator(&[vec![1.0]], Some(&[0.0])).is_err());
    ensure!(hypervolume_indicator(&[vec![1.0, -1.0]], Some(&[0.0, 0.0])).is_err());

    let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
    ensure!(convex_hull_volume(&tri).unwrap().volume == 0.5);
    let square = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
    ensure!(convex_hull_volume(&square).unwrap().volume == 1.0);
    let line = convex_hull_volume(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
    ensure!(line.degenerate && line.volume == 0.0);
    ensure!(convex_hull_volume(&vec![vec![0.0; 4]; 6]).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut disc = Vec::new();
    while disc.len() < 100 {
        let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if x * x + y * y <= 1.0 {
            disc.push(vec![x, y]);
        }
    }
    let area = convex_hull_volume(&disc).unwrap().volume;
    let samples = 100_000;
    let inside = (0..samples)
        .filter(|_| inside_hull_2d(&disc, [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
        .count();
    let estimate = 4.0 * inside as f64 / samples as f64;
    ensure!((area - estimate).abs() / area < 0.02, "hull {area} vs MC {estimate}");

    let p = ConformityParams::default();
    ensure!(conformity_score(&rows1(&[10.0, 11.0]), &rows1(&[1.0, 2.0, 3.0]), &Value, p).unwrap() == 1.0);
    let x = rows1(&[0.3, 1.1, 2.0, 2.9, 4.4]);
    ensure!(conformity_score(&x, &x, &Value, p).unwrap() == 6.0 / 10.0);

    ensure!(kl_divergence_categorical(&["A", "B"], &["B", "A"], 1e-9).unwrap().abs() < 1e-12);
    let u: Vec<Vec<f64>> = (0..500).map(|_| vec![rng.random_range(0.0..3.0), rng.random_range(0.0..1.0)]).collect();
    ensure!(kl_divergence_continuous(&u, &u, KdeParams::default()).unwrap().abs() <= 0.01);
    Ok(())
}

fn golden_diagnostics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = gaussian(&mut rng, 30, 4, 0.0);
    ensure!(knn_feature_alignment(&x, &vec!["a"; 30], 5).unwrap() == 1.0);
    ensure!(knn_feature_alignment(&x, &vec!["a"; 30], 30).is_err());

    let values: Vec<f64> = (0..40).map(|_| rng.random_range(-3.0..3.0)).collect();
    let props = rows1(&values);
    let p = SpearmanAlignmentParams::default();
    ensure!(close(spearman_alignment(&col(&values), &props, p).unwrap(), 1.0, 1e-12));
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    ensure!(close(spearman_alignment(&col(&negated), &props, p).unwrap(), 1.0, 1e-12));
    ensure!(spearman_alignment(&col(&values), &vec![vec![1.0]; 40], p).is_err());

    let u = [1.0, 2.0, 3.0, 4.0];
    ensure!(close(spearman_rho(&u, &u).unwrap(), 1.0, 1e-12));
    ensure!(close(spearman_rho(&u, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0, 1e-12));
    ensure!(close(spearman_rho(&u, &[1.0, 3.0, 2.0, 4.0]).unwrap(), 0.8, 1e-12));
    ensure!(spearman_rho(&u, &[2.0; 4]).is_err());

    let basis = DMatrix::from_fn(2, 10, |_, _| normal(&mut rng));
    let plane: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let (a, b) = (normal(&mut rng), normal(&mut rng));
            (0..10).map(|c| 1.0 + a * basis[(0, c)] + b * basis[(1, c)]).collect()
        })
        .collect();
    let proj = pca_project(&EmbeddingMatrix::from_rows(&plane, "plane").unwrap(), 2).unwrap();
    ensure!(close(proj.explained.iter().sum::<f64>(), 1.0, 1e-8));
    let iso = pca_project(&gaussian(&mut rng, 20_000, 5, 0.0), 2).unwrap();
    ensure!(iso.explained.iter().all(|e| close(*e, 0.2, 0.03)), "{:?}", iso.explained);
    Ok(())
}

fn golden_representations_and_io() -> Outcome {
    let vocab = |w: &[&str]| w.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let one = |s: &str| set("g", &[s]);
    let k1 = KmerSpec::new(1, vocab(&["A", "C"])).unwrap();
    ensure!(kmer_embed(&one("AAC"), &k1).unwrap().row(0) == [2.0 / 3.0, 1.0 / 3.0]);
    ensure!(kmer_embed(&one("AAAA"), &KmerSpec::new(2, vocab(&["AA"])).unwrap()).unwrap().row(0) == [1.0]);
    ensure!(kmer_embed(&one("ACAC"), &KmerSpec::new(2, vocab(&["GG", "TT"])).unwrap()).unwrap().row(0) == [0.0, 0.0]);
    let err = kmer_embed(&set("g", &["AAAA", "AA"]), &KmerSpec::new(3, vocab(&["AAA"])).unwrap()).unwrap_err();
    ensure!(err.to_string().contains('1'), "{err}");

    ensure!(length_property(&one("GFGD")).real("length").unwrap().as_ref() == [4.0]);
    let empty = SequenceSet::new_allow_empty("e", [""]);
    ensure!(length_property(&empty).real("length").unwrap().as_ref() == [0.0]);
    ensure!(length_property(&set("g", &["AB", "ABC"])).real("length").unwrap().as_ref() == [2.0, 3.0]);

    let parse = |t: &str| sequences::parse_sequences(t, "x").unwrap().sequences().to_vec();
    ensure!(parse(">s1\nGFGD\n>s2\nDPWDWV\n") == ["GFGD", "DPWDWV"]);
    ensure!(parse("AB\nAB\n") == ["AB", "AB"]);
    ensure!(parse(">one\nAB\nCD\n") == ["ABCD"]);

    let bytes = embeddings::to_binary(&EmbeddingMatrix::from_rows(&[[0.0]], "z").unwrap());
    ensure!(bytes.len() == 22 + 4);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    ensure!(embeddings::from_binary(&bad, "t").unwrap_err().to_string().contains("bad magic"));
    let mut v2 = bytes.clone();
    v2[4] = 2;
    ensure!(embeddings::from_binary(&v2, "t").unwrap_err().to_string().contains("unsupported version"));
    let err = embeddings::from_csv("dim=2\n1,2\n3,NaN\n", "c").unwrap_err().to_string();
    ensure!(err.contains("line 3") || err.contains("row 2"), "{err}");

    ensure!(properties::from_csv("hit:binary\n1\n2\n", "p").is_err());
    ensure!(properties::from_csv("v[0]:vec<3>,v[1]:vec<3>,v[2]:vec<3>\n1,2\n", "p").is_err());
    ensure!(properties::from_csv("x:complex\n1\n", "p").is_err());
    Ok(())
}

struct Fixed(&'static str, f64);

impl Metric for Fixed {
    fn name(&self) -> &str {
        self.0
    }
    fn direction(&self) -> Direction {
        Direction::Maximize
    }
    fn compute(&self, _: &Sample<'_>) -> Result<MetricValue> {
        Ok(MetricValue::scalar(self.1))
    }
}

fn golden_engine_and_report() -> Outcome {
    let uniq: Arc<dyn Metric> = Arc::new(StandardMetric::new(MetricKind::Uniqueness));
    let t = evaluate(&[set("g", &["A", "A"])], std::slice::from_ref(&uniq), &NoRepresentations).unwrap();
    ensure!(t.cell("g", "Uniqueness").unwrap().value().unwrap().value == 0.5);
    let t = evaluate(&[set("a", &["A", "B"]), set("b", &["A"])], &[Arc::new(StandardMetric::new(MetricKind::Diversity { k: DiversityK::Exact, seed: None }))], &NoRepresentations).unwrap();
    ensure!(!t.cells[0][0].is_error() && t.cells[1][0].is_error());
    ensure!(evaluate(&[set("a", &["A"])], &[uniq.clone(), uniq.clone()], &NoRepresentations).is_err());

    let cache: Cache<Vec<f64>> = Cache::new();
    let five = ["A", "BB", "CCC", "DDDD", "EEEEE"];
    let calls = AtomicUsize::new(0);
    let model = |b: &[&str]| {
        calls.fetch_add(b.len(), Ordering::SeqCst);
        Ok(b.iter().map(|s| vec![s.len() as f64]).collect())
    };
    cache.get_or_compute("m", &five, model).unwrap();
    cache.get_or_compute("m", &five, model).unwrap();
    ensure!(cache.miss_count() == 5 && cache.hit_count() == 5 && calls.load(Ordering::SeqCst) == 5);

    let single = |s: &str| {
        let m: Vec<Arc<dyn Metric>> = vec![Arc::new(Fixed("Score", 0.5))];
        evaluate(&[set("g", &[s])], &m, &NoRepresentations).unwrap()
    };
    let md = report::render_table(&single("A"), TableFormat::Markdown);
    ensure!(md.contains("| 0.5000 |"), "{md}");
    let folded = fold_wrap(Arc::new(Fixed("Score", 1.0)), 2, 0).unwrap();
    let t = evaluate(&[set("g", &["A", "B", "C", "D"])], &[folded], &NoRepresentations).unwrap();
    ensure!(report::render_table(&t, TableFormat::Markdown).contains("1.0000 ± 0.0000"));

    let bar = report::render_chart(&single("A"), &ChartSpec::new(ChartKind::Bar)).unwrap();
    ensure!(bar.matches("<rect class=\"bar\"").count() == 1);
    let m3: Vec<Arc<dyn Metric>> = vec![Arc::new(Fixed("S", 1.0)), Arc::new(Fixed("T", 0.5)), Arc::new(Fixed("U", 0.2))];
    let t = evaluate(&[set("a", &["A"]), set("b", &["B"])], &m3, &NoRepresentations).unwrap();
    let pc = report::render_chart(&t, &ChartSpec::new(ChartKind::ParallelCoordinates)).unwrap();
    ensure!(pc.matches("<polyline class=\"series\"").count() == 2 && pc.matches("<line class=\"axis\"").count() == 3);

    let series = IterationSeries::new(
        (0..3)
            .map(|i| Iteration { index: i, groups: vec![set("g", &["A", "B", "C"][..=i as usize])] })
            .collect(),
    )
    .unwrap();
    let traj = evaluate_iterations(&series, std::slice::from_ref(&uniq), &NoRepresentations).unwrap();
    let svg = report::trajectory_chart(&traj, &ChartSpec::new(ChartKind::Trajectory)).unwrap();
    let polylines: Vec<&str> = svg.split("<polyline").skip(1).collect();
    ensure!(polylines.len() == 1);
    let points = polylines[0].split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    ensure!(points.split_whitespace().count() == 3, "{points}");
    Ok(())
}

fn metric_golden_suite() -> Outcome {
    let start = Instant::now();
    golden_seq_metrics()?;
    golden_embed_metrics()?;
    golden_prop_metrics()?;
    golden_diagnostics()?;
    golden_representations_and_io()?;
    golden_engine_and_report()?;
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(())
}

// ---------------------------------------------------------------------------
// property criteria

fn diversity_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..50 {
        let g: Vec<String> = (0..8)
            .map(|_| {
                let len = rng.random_range(1..12);
                (0..len).map(|_| b"ACDEG"[rng.random_range(0..5)] as char).collect()
            })
            .collect();
        let p = DiversityParams { k: DiversityK::Sampled(7), seed: case };
        let got = diversity(&g, p).unwrap();
        let want = brute_diversity(&g);
        ensure!(close(got, want, 1e-12), "case {case}: {got} vs {want}");
    }
    Ok(())
}

fn fbd_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = gaussian(&mut rng, 50, 4, 0.0);
    ensure!(fbd(&x, &x).unwrap().abs() < 1e-8);
    let delta = [0.5, -1.0, 2.0, 0.25];
    let shifted: Vec<Vec<f64>> = x.iter_rows().map(|r| r.iter().zip(delta).map(|(a, b)| a + b).collect()).collect();
    let shifted = EmbeddingMatrix::from_rows(&shifted, "shifted").unwrap();
    let want: f64 = delta.iter().map(|d| d * d).sum();
    let got = fbd(&shifted, &x).unwrap();
    ensure!(close(got, want, 1e-6), "{got} vs {want}");
    for case in 0..20 {
        let d = 1 + case % 8;
        let a = random_spd(&mut rng, d);
        let b = random_spd(&mut rng, d);
        let ours = sqrt_product_trace(&a, &b).unwrap();
        let oracle = raw_sqrt_trace(&a, &b);
        ensure!(close(ours, oracle, 1e-8), "d={d}: {ours} vs {oracle}");
    }
    Ok(())
}

fn mmd_unbiasedness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let (n, m, d) = (rng.random_range(2..=30), rng.random_range(2..=30), rng.random_range(1..=6));
        let x = gaussian(&mut rng, n, d, 0.0);
        let y = gaussian(&mut rng, m, d, 0.5);
        let sigma = rng.random_range(0.5..3.0);
        let got = mmd(&x, &y, KernelSpec::rbf(sigma)).unwrap();
        let want = mmd_four_loops(&x, &y, sigma);
        ensure!(close(got, want, 1e-10), "{got} vs {want}");
    }
    let values: Vec<f64> = (0..50)
        .map(|_| {
            let x = gaussian(&mut rng, 60, 3, 0.0);
            let y = gaussian(&mut rng, 60, 3, 0.0);
            mmd(&x, &y, KernelSpec::rbf(1.5)).unwrap()
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    ensure!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    Ok(())
}

fn precision_recall_duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..100 {
        let (n, m, d, k) = (rng.random_range(5..40), rng.random_range(5..40), rng.random_range(1..5), rng.random_range(1..4));
        let g = gaussian(&mut rng, n, d, 0.3);
        let r = gaussian(&mut rng, m, d, 0.0);
        ensure!(improved_recall(&g, &r, k).unwrap() == improved_precision(&r, &g, k).unwrap());
    }
    let x = gaussian(&mut rng, 30, 3, 0.0);
    for k in [1, 3, 10] {
        ensure!(improved_precision(&x, &x, k).unwrap() == 1.0 && improved_recall(&x, &x, k).unwrap() == 1.0);
    }
    Ok(())
}

fn vendi_and_fkea() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..20 {
        let n = rng.random_range(1..30);
        let x = gaussian(&mut rng, n, 3, 0.0);
        let v = vendi_exact(&x, KernelSpec::rbf(rng.random_range(0.2..3.0))).unwrap();
        ensure!((1.0 - 1e-9..=n as f64 + 1e-9).contains(&v), "{v} outside [1, {n}]");
    }
    let same = EmbeddingMatrix::from_rows(&[[1.0, 2.0]; 9], "same").unwrap();
    ensure!(close(vendi_exact(&same, KernelSpec::rbf(1.0)).unwrap(), 1.0, 1e-9));
    let far: Vec<[f64; 2]> = (0..8).map(|i| [10.0 * i as f64, (i % 3) as f64 * 7.0]).collect();
    let far = EmbeddingMatrix::from_rows(&far, "far").unwrap();
    ensure!(close(vendi_exact(&far, KernelSpec::rbf(0.5)).unwrap(), 8.0, 1e-6));

    let n = 100;
    let x = gaussian(&mut rng, n, 4, 0.0);
    let sigma = 2.0;
    let exact = vendi_exact(&x, KernelSpec::rbf(sigma)).unwrap();
    let fkea = |m, seed, alpha| {
        let p = FkeaParams { num_features: m, renyi_alpha: alpha, seed, sigma: Bandwidth::Fixed(sigma) };
        vendi_fkea(&x, p).unwrap()
    };
    let rel_error = |m| ((0..5u64).map(|s| fkea(m, s, 1.0)).sum::<f64>() / 5.0 - exact).abs() / exact;
    // 2m = 8n; the estimate is biased low and the bias shrinks as m grows
    let errors: Vec<f64> = [2 * n, 4 * n, 8 * n].into_iter().map(rel_error).collect();
    ensure!(errors[1] < 0.05, "2m=8n: relative error {:.4} (exact {exact})", errors[1]);
    ensure!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");

    let (lo, mid, hi) = (fkea(64, 9, 1.0 - 1e-3), fkea(64, 9, 1.0), fkea(64, 9, 1.0 + 1e-3));
    ensure!(lo >= mid && mid >= hi, "{lo} {mid} {hi}");
    ensure!((lo - hi).abs() / mid < 1e-2);
    Ok(())
}

fn hypervolume_mc_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        let k = 2 + case % 2;
        let n = rng.random_range(1..10);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random_range(0.1..5.0)).collect()).collect();
        let exact = hypervolume_indicator(&points, None).unwrap();
        let (estimate, se) = hypervolume_mc(&points, 1_000_000, &mut rng);
        ensure!((exact - estimate).abs() <= 3.0 * se, "case {case}: {exact} vs {estimate} ± {se}");

        let mut with_dominated = points.clone();
        let base = &points[rng.random_range(0..n)];
        with_dominated.push(base.iter().map(|v| v * rng.random_range(0.0..1.0)).collect());
        ensure!(hypervolume_indicator(&with_dominated, None).unwrap() == exact);
    }
    Ok(())
}

fn kl_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let g: Vec<Vec<f64>> = (0..5000).map(|_| vec![Normal::new(0.0, 1.0).unwrap().sample(&mut rng)]).collect();
    let r: Vec<Vec<f64>> = (0..5000).map(|_| vec![Normal::new(1.0, 1.0).unwrap().sample(&mut rng)]).collect();
    let params = KdeParams { mc_samples: 10_000, seed: 5, ..KdeParams::default() };
    let kl = kl_divergence_continuous(&g, &r, params).unwrap();
    ensure!(close(kl, 0.5, 0.1), "KL {kl}");
    Ok(())
}

fn conformity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in [1usize, 2, 5, 17, 40] {
        let mut values: Vec<f64> = (0..n).map(|i| i as f64 * 0.37 + 1.0).collect();
        values.shuffle(&mut rng);
        let x = rows1(&values);
        let want = (n + 1) as f64 / (2 * n) as f64;
        let got = conformity_score(&x, &x, &Value, ConformityParams::default()).unwrap();
        ensure!(got == want, "n={n}: {got} vs {want}");
    }
    // KDE log-likelihood has no tied scores on this set
    let x = rows1(&[0.1, 0.9, 1.7, 3.2, 4.0, 5.5]);
    let got = conformity_score(&x, &x, &KdeLogLikelihood::default(), ConformityParams::default()).unwrap();
    ensure!(got == 7.0 / 12.0, "KDE: {got}");

    let train: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)]).collect();
    let eval: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)]).collect();
    let measure = KdeLogLikelihood::default();
    let base = measure.scores(&train, &eval).unwrap();
    let mut train_perm = train.clone();
    train_perm.shuffle(&mut rng);
    let mut order: Vec<usize> = (0..eval.len()).collect();
    order.shuffle(&mut rng);
    let eval_perm: Vec<Vec<f64>> = order.iter().map(|&i| eval[i].clone()).collect();
    let permuted = measure.scores(&train_perm, &eval_perm).unwrap();
    for (slot, &i) in order.iter().enumerate() {
        ensure!(permuted[slot] == base[i], "element {i} changed score");
    }
    Ok(())
}

fn diagnostics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, centre) in [[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]].iter().enumerate() {
        for _ in 0..20 {
            rows.push([centre[0] + rng.random_range(-1.0..1.0), centre[1] + rng.random_range(-1.0..1.0)]);
            labels.push(c);
        }
    }
    let x = EmbeddingMatrix::from_rows(&rows, "clusters").unwrap();
    for k in [1, 5, 19] {
        ensure!(knn_feature_alignment(&x, &labels, k).unwrap() == 1.0);
    }

    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = gaussian(&mut rng, 2000, 3, 0.0);
        let mut labels: Vec<bool> = (0..2000).map(|i| i % 2 == 0).collect();
        labels.shuffle(&mut rng);
        let fas = knn_feature_alignment(&x, &labels, 10).unwrap();
        ensure!(close(fas, 0.5, 0.05), "seed {seed}: FAS {fas}");
    }

    let values: Vec<f64> = (0..60).map(|_| rng.random_range(-3.0..3.0)).collect();
    let rho = spearman_alignment(&col(&values), &rows1(&values), SpearmanAlignmentParams::default()).unwrap();
    ensure!(close(rho, 1.0, 1e-12), "rho {rho}");
    Ok(())
}

fn caching_complexity() -> Outcome {
    let n = 40;
    let g = SequenceSet::new("g", (0..n).map(|i| format!("M{}K{}", "A".repeat(i % 7 + 1), i))).unwrap();
    let metrics: Vec<Arc<dyn Metric>> = vec![
        Arc::new(StandardMetric::new(MetricKind::Vendi { representation: "emb".into(), kernel: KernelSpec::rbf(1.0) })),
        Arc::new(StandardMetric::new(MetricKind::FkeaVendi {
            representation: "emb".into(),
            num_features: 16,
            renyi_alpha: 2.0,
            sigma: Bandwidth::Fixed(1.0),
            seed: Some(1),
        })),
        Arc::new(
            StandardMetric::new(MetricKind::Vendi {
                representation: "emb".into(),
                kernel: KernelSpec::RationalQuadratic { alpha: 1.0 },
            })
            .named("Vendi-RQ"),
        ),
    ];
    let run = |mut reps: Representations| {
        let counter = Arc::new(Counting(AtomicUsize::new(0)));
        reps.register_embedder("emb", counter.clone());
        let table = evaluate(std::slice::from_ref(&g), &metrics, &reps).unwrap();
        (counter.0.load(Ordering::SeqCst), table)
    };
    let (cached, a) = run(Representations::new());
    let (uncached, b) = run(Representations::uncached());
    ensure!(a.error_count() == 0);
    ensure!(cached == n, "cached invocations {cached}, want {n}");
    ensure!(uncached == 3 * n, "uncached invocations {uncached}, want {}", 3 * n);
    ensure!(a == b);
    Ok(())
}

fn fold_contract() -> Outcome {
    let folds = fold_partition(10, 3, 42).unwrap();
    ensure!(folds.len() == 3 && folds.iter().all(|f| f.len() == 3));
    let used: BTreeSet<usize> = folds.iter().flatten().copied().collect();
    ensure!(used.len() == 9);
    for n in 5..30 {
        for k in 2..=5 {
            let f = fold_partition(n, k, n as u64).unwrap();
            ensure!(f.iter().all(|fold| fold.len() == n / k));
        }
    }

    let g = set("g", &["A", "B", "C", "D", "E", "F", "G"]);
    for k in 2..=7 {
        let m = fold_wrap(Arc::new(Constant(0.25)), k, k as u64).unwrap();
        let t = evaluate(std::slice::from_ref(&g), &[m], &NoRepresentations).unwrap();
        let v = t.cell("g", "Constant").unwrap().value().unwrap();
        ensure!(v.value == 0.25 && v.deviation == Some(0.0));
    }

    let seqs: Vec<String> = (0..23).map(|i| "ACDE"[..1 + i % 4].repeat(1 + i % 3)).collect();
    let g = SequenceSet::new("g", seqs).unwrap();
    for (k, seed) in [(2, 1), (3, 2), (5, 3)] {
        let inner = Arc::new(StandardMetric::new(MetricKind::Diversity { k: DiversityK::Exact, seed: None }));
        let t = evaluate(std::slice::from_ref(&g), &[fold_wrap(inner, k, seed).unwrap()], &NoRepresentations).unwrap();
        let v = t.cell("g", "Diversity").unwrap().value().unwrap();
        let per = v.per_fold.clone().unwrap();
        let n = per.len() as f64;
        let mean = per.iter().sum::<f64>() / n;
        let sd = (per.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        ensure!(close(v.value, mean, 1e-12) && close(v.deviation.unwrap(), sd, 1e-12));
    }
    Ok(())
}

fn determinism() -> Outcome {
    let config = fixtures().join("usage_box/config.json");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let o = seqeval_cli(&[
            "evaluate",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
            "--seed",
            "17",
        ]);
        ensure!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["table.md", "table.csv", "table.json", "bar.svg", "parallel.svg"] {
        let a = fs::read(dirs[0].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = fs::read(dirs[1].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure!(a == b, "{f} differs between runs");
    }

    // the library path is deterministic too, including the climber fixture
    let rounds = HillClimber::default().run();
    ensure!(rounds == HillClimber::default().run());
    Ok(())
}

fn cli_end_to_end() -> Outcome {
    let golden = "\
| Group | Diversity ↑ | FBD ↓ |
|---|---:|---:|
| UniProt | 0.8778 | 0.0000 |
| DBAASP | 0.9444 | 0.5169 |
";
    let config = fixtures().join("usage_box/config.json");
    let out = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = seqeval_cli(&["evaluate", "--config", config.to_str().unwrap(), "--out-dir", out.path().to_str().unwrap()]);
    let elapsed = start.elapsed();
    ensure!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    ensure!(stdout == golden, "got\n{stdout}");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("metric golden suite", metric_golden_suite),
        ("diversity identity", diversity_identity),
        ("FBD properties", fbd_properties),
        ("MMD unbiasedness", mmd_unbiasedness),
        ("precision/recall duality", precision_recall_duality),
        ("Vendi/FKEA", vendi_and_fkea),
        ("hypervolume", hypervolume_mc_criterion),
        ("KL oracle", kl_oracle),
        ("conformity", conformity),
        ("diagnostics", diagnostics),
        ("caching complexity", caching_complexity),
        ("fold contract", fold_contract),
        ("determinism", determinism),
        ("CLI end-to-end", cli_end_to_end),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS {name} ({ms} ms)"),
            Err(e) => {
                failures += 1;
                println!("FAIL {name} ({ms} ms): {e}");
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
