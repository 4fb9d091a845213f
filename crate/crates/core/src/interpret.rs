//! Permutation feature importance over modality column blocks.
//!
//! The importance of a block is the drop in a score (classification
//! accuracy by default) when the block is shuffled across samples as an
//! intact unit, which breaks its link to the labels while keeping each row's
//! within-block structure. Drops for the rPPG and visual blocks are then
//! normalized into percentage contributions.

use alloc::vec::Vec;
use core::ops::Range;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classifier::MlpModel;
use crate::matrix::Matrix;

/// Default number of permutations per group.
pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpretError {
    #[error("column span {start}..{end} exceeds feature width {width}")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        width: usize,
    },
    #[error("permutation is not a bijection over {0} samples")]
    InvalidPermutation(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("{features} samples but {labels} labels")]
    Misaligned { features: usize, labels: usize },
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error("scorer returned non-finite score {0}")]
    NonFiniteScore(f64),
}

/// Returns a copy of `features` where row `i` takes the `span` columns of row
/// `permutation[i]`; all other columns are untouched.
pub fn permute_group(
    features: &Matrix,
    span: Range<usize>,
    permutation: &[usize],
) -> Result<Matrix, InterpretError> {
    check_span(&span, features.cols())?;
    let n = features.rows();
    if permutation.len() != n {
        return Err(InterpretError::InvalidPermutation(n));
    }
    let mut seen = alloc::vec![false; n];
    for &p in permutation {
        if p >= n || core::mem::replace(&mut seen[p], true) {
            return Err(InterpretError::InvalidPermutation(n));
        }
    }
    let mut out = features.clone();
    for (i, &src) in permutation.iter().enumerate() {
        out.row_mut(i)[span.clone()].copy_from_slice(&features.row(src)[span.clone()]);
    }
    Ok(out)
}

fn check_span(span: &Range<usize>, width: usize) -> Result<(), InterpretError> {
    if span.start > span.end || span.end > width {
        return Err(InterpretError::SpanOutOfRange {
            start: span.start,
            end: span.end,
            width,
        });
    }
    Ok(())
}

/// Importance of one column block.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupImportance {
    /// Score on the unpermuted data.
    pub baseline: f64,
    /// `baseline − permuted score`, one per repeat, in draw order.
    pub per_repeat: Vec<f64>,
    /// Arithmetic mean of `per_repeat`.
    pub mean_drop: f64,
}

/// Permutation importance of `span`: the baseline score minus the score
/// after each of `repeats` seeded random permutations of the block.
pub fn pfi<S>(
    scorer: S,
    features: &Matrix,
    labels: &[usize],
    span: Range<usize>,
    repeats: usize,
    seed: u64,
) -> Result<GroupImportance, InterpretError>
where
    S: Fn(&Matrix, &[usize]) -> f64,
{
    if features.rows() == 0 {
        return Err(InterpretError::EmptyDataset);
    }
    if features.rows() != labels.len() {
        return Err(InterpretError::Misaligned {
            features: features.rows(),
            labels: labels.len(),
        });
    }
    if repeats == 0 {
        return Err(InterpretError::ZeroRepeats);
    }
    check_span(&span, features.cols())?;
    let score = |m: &Matrix| {
        let s = scorer(m, labels);
        if s.is_finite() {
            Ok(s)
        } else {
            Err(InterpretError::NonFiniteScore(s))
        }
    };
    let baseline = score(features)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut permutation: Vec<usize> = (0..labels.len()).collect();
    let mut per_repeat = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        permutation.sort_unstable();
        permutation.shuffle(&mut rng);
        let permuted = permute_group(features, span.clone(), &permutation)?;
        per_repeat.push(baseline - score(&permuted)?);
    }
    let mean_drop = per_repeat.iter().sum::<f64>() / repeats as f64;
    Ok(GroupImportance {
        baseline,
        per_repeat,
        mean_drop,
    })
}

/// Classification accuracy of `model` over the rows of a feature matrix.
pub fn accuracy_scorer(model: &MlpModel) -> impl Fn(&Matrix, &[usize]) -> f64 + '_ {
    move |features, labels| {
        let correct = features
            .iter_rows()
            .zip(labels)
            .filter(|(row, &y)| model.predict(row).is_ok_and(|p| p == y))
            .count();
        correct as f64 / labels.len() as f64
    }
}

/// Percentage attribution of skill between the two modalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contributions {
    pub rppg_pct: f64,
    pub visual_pct: f64,
    /// A negative drop was raised to zero before normalizing.
    pub clamped: bool,
    /// Both clamped drops were zero; the split defaults to 50/50.
    pub degenerate: bool,
}

/// Normalizes two PFI drops into percentages summing to 100, after clamping
/// negative drops to zero.
pub fn modality_contributions(rppg_drop: f64, visual_drop: f64) -> Contributions {
    let clamped = rppg_drop < 0.0 || visual_drop < 0.0;
    let r = rppg_drop.max(0.0);
    let v = visual_drop.max(0.0);
    let total = r + v;
    if total.is_nan() || total <= 0.0 {
        return Contributions {
            rppg_pct: 50.0,
            visual_pct: 50.0,
            clamped,
            degenerate: true,
        };
    }
    let rppg_pct = (100.0 * r / total).min(100.0);
    Contributions {
        rppg_pct,
        visual_pct: 100.0 - rppg_pct,
        clamped,
        degenerate: false,
    }
}

/// Per-modality importances of an early-fusion model plus their contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PfiReport {
    pub baseline_score: f64,
    pub rppg: GroupImportance,
    pub visual: GroupImportance,
    pub contributions: Contributions,
}

/// Runs [`pfi`] with accuracy on the rPPG and visual blocks of an
/// early-fusion input. The visual block uses `seed + 1` so the two groups
/// draw independent permutations.
pub fn explain_modalities(
    model: &MlpModel,
    features: &Matrix,
    labels: &[usize],
    rppg_span: Range<usize>,
    visual_span: Range<usize>,
    repeats: usize,
    seed: u64,
) -> Result<PfiReport, InterpretError> {
    let rppg = pfi(
        accuracy_scorer(model),
        features,
        labels,
        rppg_span,
        repeats,
        seed,
    )?;
    let visual = pfi(
        accuracy_scorer(model),
        features,
        labels,
        visual_span,
        repeats,
        seed.wrapping_add(1),
    )?;
    Ok(PfiReport {
        baseline_score: rppg.baseline,
        contributions: modality_contributions(rppg.mean_drop, visual.mean_drop),
        rppg,
        visual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::init_network;
    use proptest::prelude::*;

    fn grid(rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|i| i as f64).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_permutation() {
        let m = grid(4, 5);
        assert_eq!(permute_group(&m, 1..3, &[0, 1, 2, 3]).unwrap(), m);
    }

    #[test]
    fn block_moves_intact() {
        let m = grid(3, 4);
        let p = permute_group(&m, 0..2, &[2, 0, 1]).unwrap();
        assert_eq!(p.row(0), &[8.0, 9.0, 2.0, 3.0]);
        assert_eq!(p.row(1), &[0.0, 1.0, 6.0, 7.0]);
        assert_eq!(p.row(2), &[4.0, 5.0, 10.0, 11.0]);
    }

    #[test]
    fn permutation_errors() {
        let m = grid(3, 4);
        assert!(matches!(
            permute_group(&m, 2..5, &[0, 1, 2]),
            Err(InterpretError::SpanOutOfRange { .. })
        ));
        assert_eq!(
            permute_group(&m, 0..1, &[0, 0, 1]),
            Err(InterpretError::InvalidPermutation(3))
        );
        assert_eq!(
            permute_group(&m, 0..1, &[0, 1, 3]),
            Err(InterpretError::InvalidPermutation(3))
        );
        assert_eq!(
            permute_group(&m, 0..1, &[0, 1]),
            Err(InterpretError::InvalidPermutation(3))
        );
    }

    #[test]
    fn drop_is_baseline_minus_permuted() {
        // Scorer: 1.0 on the original matrix, 0.6 on anything else.
        let m = grid(5, 2);
        let reference = m.clone();
        let scorer = |x: &Matrix, _: &[usize]| if *x == reference { 1.0 } else { 0.6 };
        let g = pfi(scorer, &m, &[0; 5], 0..1, 20, 3).unwrap();
        assert_eq!(g.baseline, 1.0);
        for &d in &g.per_repeat {
            assert!(d == 0.0 || d == 0.4, "{d}");
        }
        assert!(g.per_repeat.contains(&0.4));
        assert_eq!(g.per_repeat.len(), 20);
        assert!((g.mean_drop - g.per_repeat.iter().sum::<f64>() / 20.0).abs() < 1e-15);
    }

    #[test]
    fn ignored_group_has_zero_importance() {
        let mut model = init_network(&[6, 8, 10], &[], 5).unwrap();
        for j in 0..8 {
            for c in 0..3 {
                model.layers_mut()[0].weights[(j, c)] = 0.0;
            }
        }
        let x = Matrix::from_vec(
            30,
            6,
            (0..180).map(|i| ((i * 37) % 17) as f64 - 8.0).collect(),
        )
        .unwrap();
        let labels: Vec<usize> = (0..30).map(|i| i % 10).collect();
        let g = pfi(accuracy_scorer(&model), &x, &labels, 0..3, 7, 1).unwrap();
        assert!(g.per_repeat.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn pfi_errors() {
        let m = grid(2, 2);
        let s = |_: &Matrix, _: &[usize]| 1.0;
        assert_eq!(
            pfi(s, &Matrix::zeros(0, 2), &[], 0..1, 1, 0),
            Err(InterpretError::EmptyDataset)
        );
        assert_eq!(
            pfi(s, &m, &[0, 0], 0..1, 0, 0),
            Err(InterpretError::ZeroRepeats)
        );
        assert!(matches!(
            pfi(s, &m, &[0], 0..1, 1, 0),
            Err(InterpretError::Misaligned { .. })
        ));
        let nan = |_: &Matrix, _: &[usize]| f64::NAN;
        assert!(matches!(
            pfi(nan, &m, &[0, 0], 0..1, 1, 0),
            Err(InterpretError::NonFiniteScore(_))
        ));
    }

    #[test]
    fn pfi_is_deterministic() {
        let m = grid(6, 2);
        let scorer = |x: &Matrix, _: &[usize]| x.row(0)[0];
        let a = pfi(scorer, &m, &[0; 6], 0..1, 4, 9).unwrap();
        let b = pfi(scorer, &m, &[0; 6], 0..1, 4, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn contribution_examples() {
        let c = modality_contributions(0.3, 0.5);
        assert!((c.rppg_pct - 37.5).abs() < 1e-12 && (c.visual_pct - 62.5).abs() < 1e-12);
        assert!(!c.clamped && !c.degenerate);
        let c = modality_contributions(-0.1, 0.4);
        assert_eq!((c.rppg_pct, c.visual_pct), (0.0, 100.0));
        assert!(c.clamped);
        let c = modality_contributions(0.0, -0.2);
        assert_eq!((c.rppg_pct, c.visual_pct), (50.0, 50.0));
        assert!(c.degenerate && c.clamped);
    }

    proptest! {
        #[test]
        fn permutation_preserves_columns(
            seed in any::<u64>(),
            rows in 1usize..12,
            start in 0usize..4,
            len in 0usize..4,
        ) {
            let m = Matrix::from_vec(rows, 8, (0..rows * 8).map(|i| ((i * 7919) % 101) as f64).collect()).unwrap();
            let mut perm: Vec<usize> = (0..rows).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let span = start..start + len;
            let p = permute_group(&m, span.clone(), &perm).unwrap();
            for c in 0..8 {
                let mut before: Vec<f64> = m.iter_rows().map(|r| r[c]).collect();
                let mut after: Vec<f64> = p.iter_rows().map(|r| r[c]).collect();
                if span.contains(&c) {
                    before.sort_by(f64::total_cmp);
                    after.sort_by(f64::total_cmp);
                }
                prop_assert_eq!(before, after);
            }
        }

        #[test]
        fn contributions_sum_to_hundred(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let c = modality_contributions(a, b);
            prop_assert!((c.rppg_pct + c.visual_pct - 100.0).abs() <= 0.01);
            prop_assert!((0.0..=100.0).contains(&c.rppg_pct));
            prop_assert!((0.0..=100.0).contains(&c.visual_pct));
        }
    }

    #[test]
    fn explain_uses_both_spans() {
        let model = init_network(&[4, 6, 10], &[], 2).unwrap();
        let x = Matrix::from_vec(10, 4, (0..40).map(|i| (i % 7) as f64).collect()).unwrap();
        let labels: Vec<usize> = (0..10).collect();
        let r = explain_modalities(&model, &x, &labels, 0..2, 2..4, 3, 11).unwrap();
        assert_eq!(r.rppg.per_repeat.len(), 3);
        assert_eq!(r.visual.per_repeat.len(), 3);
        assert_eq!(r.baseline_score, r.visual.baseline);
    }
}
