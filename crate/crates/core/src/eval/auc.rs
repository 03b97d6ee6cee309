use crate::error::{Error, Result};

/// Area under the ROC curve of `pos` against `neg` (Mann–Whitney, ties count ½).
///
/// Exact: ties are counted in integer half-units, so the result is the single
/// rounding of `2U / 2PN`.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "AUC needs both classes ({} positives, {} negatives)",
            pos.len(),
            neg.len()
        )));
    }
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut neg = neg.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut pos = pos.to_vec();
    pos.sort_by(f64::total_cmp);

    // For ascending positives, walk the negative cursor forward once.
    let (mut below, mut upto) = (0usize, 0usize);
    let mut doubled: u128 = 0;
    for &p in &pos {
        while below < neg.len() && neg[below] < p {
            below += 1;
        }
        upto = upto.max(below);
        while upto < neg.len() && neg[upto] <= p {
            upto += 1;
        }
        doubled += (below + upto) as u128; // 2·below + ties
    }
    Ok(doubled as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64)
}
