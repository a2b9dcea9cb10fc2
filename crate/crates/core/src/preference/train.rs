//! Training: object score tables from good/bad analyses, then scaling
//! factors by least squares against similarity and by hill climbing on
//! top-1 accuracy.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use super::{select_best, ObjectScoreTable, TableScoring};
use crate::error::{Error, Result};

/// One analysis as seen by selection.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate {
    pub values: Vec<f64>,
    pub original: bool,
    pub acoustic: f64,
}

/// Every candidate analysis of one training utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSentence {
    pub candidates: Vec<RankedCandidate>,
    /// Index of the analysis matching the reference, if any.
    pub correct: Option<usize>,
    /// Similarity of each candidate to the reference analysis.
    pub similarities: Vec<f64>,
}

/// Count each object once per analysis it occurs in, split by whether the
/// analysis was good. Needs at least one good and one bad analysis.
pub fn train_object_scores<S: AsRef<str>>(
    kind: &str,
    analyses: &[(Vec<S>, bool)],
    alpha: f64,
    scoring: TableScoring,
) -> Result<ObjectScoreTable> {
    if !(alpha > 0.0) {
        return Err(Error::Validation(format!("smoothing constant must be positive, got {alpha}")));
    }
    if !analyses.iter().any(|a| a.1) || analyses.iter().all(|a| a.1) {
        return Err(Error::Validation(format!(
            "training for '{kind}' needs both good and bad analyses"
        )));
    }
    let mut t = ObjectScoreTable::new(kind, alpha, scoring);
    for (objects, good) in analyses {
        if *good {
            t.good_total += 1;
        }
        let uniq: BTreeSet<&str> = objects.iter().map(|o| o.as_ref()).collect();
        for o in uniq {
            let c = t.counts.entry(o.to_string()).or_default();
            if *good {
                c.good += 1;
            } else {
                c.bad += 1;
            }
        }
    }
    Ok(t)
}

/// Least-squares weights fitting `rows · w ≈ targets`, with the residual
/// sum of squares. A rank-deficient design is solved with ridge
/// regularisation when `ridge > 0` and rejected otherwise.
pub fn train_scaling_phase1(rows: &[Vec<f64>], targets: &[f64], ridge: f64) -> Result<(Vec<f64>, f64)> {
    if rows.len() != targets.len() {
        return Err(Error::Invariant("phase 1: row and target counts differ".into()));
    }
    let n = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || n == 0 {
        return Err(Error::Validation("phase 1: no training rows".into()));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Invariant("phase 1: ragged design matrix".into()));
    }
    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(targets);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = rows.len().max(n) as f64 * f64::EPSILON * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let w = if rank == n {
        svd.solve(&b, tol).map_err(|e| Error::Invariant(format!("phase 1: {e}")))?
    } else if ridge > 0.0 {
        let ata = a.transpose() * &a + DMatrix::identity(n, n) * ridge;
        let atb = a.transpose() * &b;
        match ata.clone().cholesky() {
            Some(c) => c.solve(&atb),
            None => ata
                .lu()
                .solve(&atb)
                .ok_or_else(|| Error::Invariant("phase 1: ridge system is singular".into()))?,
        }
    } else {
        return Err(Error::RankDeficient { rank, columns: n });
    };
    let resid = (&a * &w - &b).norm_squared();
    Ok((w.iter().copied().collect(), resid))
}

/// Number of sentences whose correct analysis is selected under `w`.
pub fn phase2_objective(sentences: &[TrainingSentence], w: &[f64]) -> usize {
    sentences
        .iter()
        .filter(|s| s.correct.is_some() && select_best(&s.candidates, w) == s.correct)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase2Config {
    pub max_sweeps: usize,
    /// Additive step as a fraction of the largest weight magnitude.
    pub delta: f64,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Phase2Config {
            max_sweeps: 20,
            delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Outcome {
    pub weights: Vec<f64>,
    /// Objective before the first sweep and after each sweep.
    pub trajectory: Vec<usize>,
}

/// Coordinate-wise hill climbing on top-1 count. Each coordinate tries
/// doubling, halving and an additive step either way; a change is kept only
/// if it strictly improves the count, preferring the smallest change among
/// equal gains. Stops after a sweep with no change or at `max_sweeps`.
pub fn train_scaling_phase2(sentences: &[TrainingSentence], w0: &[f64], cfg: Phase2Config) -> Phase2Outcome {
    let mut w = w0.to_vec();
    let mut current = phase2_objective(sentences, &w);
    let mut trajectory = vec![current];
    for _ in 0..cfg.max_sweeps {
        let mut changed = false;
        for f in 0..w.len() {
            let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let delta = if scale > 0.0 { cfg.delta * scale } else { cfg.delta };
            let old = w[f];
            let mut best: Option<(usize, f64, f64)> = None;
            for proposal in [old * 2.0, old * 0.5, old + delta, old - delta] {
                if proposal == old || !proposal.is_finite() {
                    continue;
                }
                w[f] = proposal;
                let score = phase2_objective(sentences, &w);
                let change = (proposal - old).abs();
                let better = match best {
                    None => score > current,
                    Some((bs, _, bc)) => score > bs || (score == bs && change < bc),
                };
                if better {
                    best = Some((score, proposal, change));
                }
            }
            match best {
                Some((score, proposal, _)) => {
                    w[f] = proposal;
                    current = score;
                    changed = true;
                }
                None => w[f] = old,
            }
        }
        trajectory.push(current);
        if !changed {
            break;
        }
    }
    Phase2Outcome { weights: w, trajectory }
}

/// Top-1 count of the weights that phase 1 alone would produce, for
/// reporting alongside phase 2.
pub fn top1_rate(sentences: &[TrainingSentence], w: &[f64]) -> f64 {
    let eligible = sentences.iter().filter(|s| s.correct.is_some()).count();
    if eligible == 0 {
        return 0.0;
    }
    phase2_objective(sentences, w) as f64 / eligible as f64
}

/// Design rows and similarity targets of every candidate in `sentences`.
/// Phase-1 rows and targets with each sentence's mean removed, so the fit
/// explains differences between competing analyses of one utterance
/// rather than between utterances. Single-candidate sentences carry no
/// such information and are left out.
pub fn phase1_data_centered(sentences: &[TrainingSentence]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for s in sentences.iter().filter(|s| s.candidates.len() > 1) {
        let n = s.candidates.len() as f64;
        let dims = s.candidates[0].values.len();
        let mean: Vec<f64> = (0..dims)
            .map(|j| s.candidates.iter().map(|c| c.values[j]).sum::<f64>() / n)
            .collect();
        let tmean = s.similarities.iter().sum::<f64>() / n;
        for (c, sim) in s.candidates.iter().zip(&s.similarities) {
            rows.push(c.values.iter().zip(&mean).map(|(v, m)| v - m).collect());
            targets.push(sim - tmean);
        }
    }
    (rows, targets)
}

pub fn phase1_data(sentences: &[TrainingSentence]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for s in sentences {
        for (c, sim) in s.candidates.iter().zip(&s.similarities) {
            rows.push(c.values.clone());
            targets.push(*sim);
        }
    }
    (rows, targets)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::preference::ObjectCounts;
    use crate::preference::dot;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Normal equations solved by Gaussian elimination with partial
    /// pivoting.
    fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let n = rows[0].len();
        let mut m = vec![vec![0.0; n + 1]; n];
        for (r, t) in rows.iter().zip(y) {
            for i in 0..n {
                for j in 0..n {
                    m[i][j] += r[i] * r[j];
                }
                m[i][n] += r[i] * t;
            }
        }
        for c in 0..n {
            let p = (c..n).max_by(|a, b| m[*a][c].abs().total_cmp(&m[*b][c].abs())).unwrap();
            m.swap(c, p);
            for r in 0..n {
                if r != c {
                    let k = m[r][c] / m[c][c];
                    for j in c..=n {
                        m[r][j] -= k * m[c][j];
                    }
                }
            }
        }
        (0..n).map(|i| m[i][n] / m[i][i]).collect()
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..=10);
            let m = rng.gen_range(n + 2..=200);
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (w, resid) = train_scaling_phase1(&rows, &y, 0.0).unwrap();
            let oracle = normal_equations(&rows, &y);
            for (a, b) in w.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-6, "{w:?} vs {oracle:?}");
            }
            let r2: f64 = rows.iter().zip(&y).map(|(r, t)| (dot(r, &oracle) - t).powi(2)).sum();
            assert!((resid - r2).abs() < 1e-6);
        }
    }

    #[test]
    fn exact_fit_and_local_optimality() {
        let (w, r) = train_scaling_phase1(&[vec![1.0], vec![2.0]], &[2.0, 4.0], 0.0).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12 && r < 1e-20);

        let rows = vec![vec![1.0, 0.5], vec![0.2, 1.0], vec![1.0, 1.0], vec![3.0, -1.0]];
        let y = vec![0.3, 0.9, 0.7, 0.1];
        let (w, r) = train_scaling_phase1(&rows, &y, 0.0).unwrap();
        let oracle = normal_equations(&rows, &y);
        assert!(w.iter().zip(&oracle).all(|(a, b)| (a - b).abs() < 1e-9));
        let resid = |w: &[f64]| -> f64 { rows.iter().zip(&y).map(|(x, t)| (dot(x, w) - t).powi(2)).sum() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..1000 {
            let mut p = w.clone();
            if i < 4 {
                p[i / 2] += if i % 2 == 0 { 1e-3 } else { -1e-3 };
            } else {
                p.iter_mut().for_each(|x| *x += rng.gen_range(-1e-2..1e-2));
            }
            assert!(resid(&p) >= r - 1e-12);
        }
    }

    #[test]
    fn rank_deficiency() {
        let rows = vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]];
        let y = vec![1.0, 2.0, 3.0];
        match train_scaling_phase1(&rows, &y, 0.0) {
            Err(Error::RankDeficient { rank: 1, columns: 2 }) => {}
            other => panic!("{other:?}"),
        }
        let (w, _) = train_scaling_phase1(&rows, &y, 1e-6).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-4 && w[1] == 0.0);
    }

    fn cand(values: Vec<f64>) -> RankedCandidate {
        RankedCandidate {
            values,
            original: true,
            acoustic: 0.0,
        }
    }

    /// Separable data where the least-squares fit is pulled off by bulk
    /// similarity: the correct candidate is the only one with a positive
    /// second feature, but most candidates differ mainly in the first.
    pub(crate) fn separable() -> Vec<TrainingSentence> {
        let mut out = Vec::new();
        for i in 0..10 {
            let x = 1.0 + i as f64 * 0.1;
            out.push(TrainingSentence {
                candidates: vec![cand(vec![0.0, 1.0]), cand(vec![x, 0.0]), cand(vec![0.5 * x, 0.0])],
                correct: Some(0),
                similarities: vec![1.0, 0.9, 0.45],
            });
        }
        out
    }

    #[test]
    fn phase2_fixes_what_phase1_misses() {
        let data = separable();
        let (rows, y) = phase1_data(&data);
        let (w1, _) = train_scaling_phase1(&rows, &y, 0.0).unwrap();
        let p1 = phase2_objective(&data, &w1);
        assert!(p1 < data.len(), "phase 1 already perfect: {w1:?}");
        let out = train_scaling_phase2(&data, &w1, Phase2Config::default());
        assert_eq!(*out.trajectory.last().unwrap(), data.len());
        assert!(out.trajectory.windows(2).all(|p| p[0] <= p[1]));
        assert_eq!(out.trajectory[0], p1);
    }

    #[test]
    fn phase2_keeps_optimum() {
        let data = separable();
        let w = vec![0.0, 5.0];
        assert_eq!(phase2_objective(&data, &w), data.len());
        let out = train_scaling_phase2(&data, &w, Phase2Config::default());
        assert_eq!(out.weights, w);
        assert_eq!(out.trajectory, vec![data.len(), data.len()]);
    }

    #[test]
    fn object_counts_are_per_analysis() {
        let data = vec![
            (vec!["a", "a", "b"], true),
            (vec!["a"], true),
            (vec!["a"], true),
            (vec!["a", "c"], false),
        ];
        let t = train_object_scores("rules", &data, 0.5, TableScoring::Discriminative).unwrap();
        assert_eq!(t.counts["a"], ObjectCounts { good: 3, bad: 1 });
        assert_eq!(t.counts["c"], ObjectCounts { good: 0, bad: 1 });
        assert!((t.score("a") + 0.357).abs() < 1e-3);
        assert_eq!(t.good_total, 3);
        let f = train_object_scores("rules", &data, 0.5, TableScoring::FrequencyOnly).unwrap();
        assert_eq!(f.score("a"), (3.5f64 / 4.0).ln());
        assert!(train_object_scores("rules", &data[..3], 0.5, TableScoring::Discriminative).is_err());
        assert!(train_object_scores::<&str>("rules", &[], 0.5, TableScoring::Discriminative).is_err());
    }

    proptest! {
        #[test]
        fn phase2_never_decreases(
            seed in any::<u64>(),
            nsent in 1usize..8,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<TrainingSentence> = (0..nsent)
                .map(|_| {
                    let k = rng.gen_range(1..5);
                    let candidates: Vec<RankedCandidate> = (0..k)
                        .map(|_| RankedCandidate {
                            values: (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                            original: rng.gen_bool(0.7),
                            acoustic: rng.gen_range(-10.0..0.0),
                        })
                        .collect();
                    TrainingSentence {
                        correct: Some(rng.gen_range(0..k)),
                        similarities: vec![0.5; k],
                        candidates,
                    }
                })
                .collect();
            let w0: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let out = train_scaling_phase2(&data, &w0, Phase2Config { max_sweeps: 5, delta: 0.1 });
            prop_assert!(out.trajectory.windows(2).all(|p| p[0] <= p[1]));
            prop_assert_eq!(*out.trajectory.last().unwrap(), phase2_objective(&data, &out.weights));
            prop_assert!(out.trajectory[0] == phase2_objective(&data, &w0));
        }
    }
}
