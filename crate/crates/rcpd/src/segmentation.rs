//! Multiple change-point detection by binary segmentation.
//!
//! The standard algorithm recursively applies the retrospective test: a
//! rejected segment is split at the estimated change and both halves are
//! searched again. It is known to over-estimate the number of changes, so a
//! validated variant re-tests every candidate on the segment delimited by its
//! two neighbours (with the segment boundaries appended) and keeps only the
//! candidates whose re-test still rejects. Validation is a single pass and
//! never relocates a candidate.

use crate::critical_values::CvProvider;
use crate::error::Result;
use crate::offline::offline_test_with_cv;
use crate::series::{Segment, TimeSeries};

/// Standard recursive binary segmentation with an explicit critical value.
///
/// Returns sorted, deduplicated absolute change indices. A change index `k`
/// splits its segment into `[start, k]` and `[k + 1, end]`.
pub fn binary_segmentation_with_cv(
    series: &TimeSeries,
    seg: Segment,
    cv: f64,
) -> Result<Vec<usize>> {
    let mut found = Vec::new();
    recurse(series, seg, cv, &mut found)?;
    found.sort_unstable();
    found.dedup();
    Ok(found)
}

fn recurse(series: &TimeSeries, seg: Segment, cv: f64, out: &mut Vec<usize>) -> Result<()> {
    let result = offline_test_with_cv(series, seg, cv)?;
    if !result.rejected {
        return Ok(());
    }
    let k = result.argmax_index;
    if k < seg.start || k >= seg.end {
        // A maximiser on the boundary leaves nothing to split.
        return Ok(());
    }
    out.push(k);
    recurse(series, Segment::new(seg.start, k)?, cv, out)?;
    recurse(series, Segment::new(k + 1, seg.end)?, cv, out)?;
    Ok(())
}

/// Validation pass of the modified algorithm: re-test each candidate between
/// its neighbours and keep the confirmed ones.
pub fn validate_candidates(
    series: &TimeSeries,
    seg: Segment,
    cv: f64,
    candidates: &[usize],
) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut bounds = Vec::with_capacity(candidates.len() + 2);
    bounds.push(seg.start);
    bounds.extend_from_slice(candidates);
    bounds.push(seg.end);
    let mut kept = Vec::new();
    for i in 1..bounds.len() - 1 {
        let window = Segment::new(bounds[i - 1], bounds[i + 1])?;
        if offline_test_with_cv(series, window, cv)?.rejected {
            kept.push(bounds[i]);
        }
    }
    Ok(kept)
}

/// Standard binary segmentation at significance level `alpha`.
pub fn binary_segmentation(
    series: &TimeSeries,
    seg: Segment,
    cv_provider: &dyn CvProvider,
    alpha: f64,
) -> Result<Vec<usize>> {
    seg.check_within(series.len())?;
    let cv = cv_provider.offline_cv(series.dim(), alpha)?;
    binary_segmentation_with_cv(series, seg, cv)
}

/// Binary segmentation followed by the cross-validation pass.
///
/// The output is always a subset of [`binary_segmentation`]'s.
pub fn modified_binary_segmentation(
    series: &TimeSeries,
    seg: Segment,
    cv_provider: &dyn CvProvider,
    alpha: f64,
) -> Result<Vec<usize>> {
    seg.check_within(series.len())?;
    let cv = cv_provider.offline_cv(series.dim(), alpha)?;
    let candidates = binary_segmentation_with_cv(series, seg, cv)?;
    validate_candidates(series, seg, cv, &candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical_values::FixedCv;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const CV_OFFLINE: f64 = 1.844;

    fn step_series(seed: u64, levels: &[(usize, f64)]) -> TimeSeries {
        // levels: (length, mean) blocks with unit white noise.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::new();
        for &(len, mean) in levels {
            for _ in 0..len {
                values.push(mean + rng.sample::<f64, _>(StandardNormal));
            }
        }
        TimeSeries::from_values(values).unwrap()
    }

    #[test]
    fn finds_two_clear_changes() {
        let s = step_series(2, &[(200, 0.0), (200, 4.0), (200, 0.0)]);
        let cps = binary_segmentation_with_cv(&s, s.full_segment(), CV_OFFLINE).unwrap();
        assert_eq!(cps.len(), 2, "found {cps:?}");
        assert!((cps[0] as i64 - 200).unsigned_abs() <= 5);
        assert!((cps[1] as i64 - 400).unsigned_abs() <= 5);
    }

    #[test]
    fn single_large_step_identical_under_validation() {
        let s = step_series(3, &[(150, 0.0), (150, 5.0)]);
        let provider = FixedCv::offline_only(CV_OFFLINE);
        let bs = binary_segmentation(&s, s.full_segment(), &provider, 0.05).unwrap();
        let mbs = modified_binary_segmentation(&s, s.full_segment(), &provider, 0.05).unwrap();
        assert_eq!(bs, mbs);
        assert_eq!(bs.len(), 1);
    }

    #[test]
    fn empty_candidates_stay_empty() {
        let s = step_series(4, &[(300, 0.0)]);
        let validated = validate_candidates(&s, s.full_segment(), CV_OFFLINE, &[]).unwrap();
        assert!(validated.is_empty());
    }

    #[test]
    fn untestable_segment_yields_no_changes() {
        let s = TimeSeries::from_values(vec![1.0; 50]).unwrap();
        let cps = binary_segmentation_with_cv(&s, s.full_segment(), CV_OFFLINE).unwrap();
        assert!(cps.is_empty());
    }

    #[test]
    fn validated_is_subset_and_inside_segment() {
        for seed in 0..30 {
            let s = step_series(seed, &[(80, 0.0), (80, 1.5), (80, -1.0), (80, 2.0)]);
            let seg = s.full_segment();
            let bs = binary_segmentation_with_cv(&s, seg, CV_OFFLINE).unwrap();
            let mbs = validate_candidates(&s, seg, CV_OFFLINE, &bs).unwrap();
            assert!(mbs.iter().all(|cp| bs.contains(cp)), "seed {seed}: {mbs:?} not in {bs:?}");
            assert!(bs.iter().all(|&cp| cp >= seg.start && cp < seg.end));
            assert!(bs.windows(2).all(|w| w[0] < w[1]), "sorted unique");
        }
    }

    #[test]
    fn validation_prunes_a_planted_spurious_candidate() {
        // One real change at 200 plus a fake candidate at 100: the window
        // (1, 200) around the fake one has a constant mean, so it must go.
        let s = step_series(9, &[(200, 0.0), (200, 3.0)]);
        let real = binary_segmentation_with_cv(&s, s.full_segment(), CV_OFFLINE).unwrap();
        assert_eq!(real.len(), 1);
        let mut with_fake = vec![100];
        with_fake.extend(&real);
        with_fake.sort_unstable();
        let kept = validate_candidates(&s, s.full_segment(), CV_OFFLINE, &with_fake).unwrap();
        assert_eq!(kept, real);
    }
}
