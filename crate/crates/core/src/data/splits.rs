use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bundle::Splits;
use crate::error::{Error, Result};

/// Train / validation / test fractions.
pub const DEFAULT_SPLIT_RATIOS: (f64, f64, f64) = (0.2, 0.1, 0.7);

const MIN_PER_CLASS: usize = 3;

/// Distribute `total` units proportionally to `weights` (largest remainder,
/// ties to the lower index).
fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = total - counts.iter().sum::<usize>().min(total);
    for &k in order.iter().cycle().take(weights.len() * 2) {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Per-class split sizes whose rows sum to the class sizes and whose columns
/// sum to the global split sizes.
fn class_split_counts(class_sizes: &[usize], ratios: [f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = class_sizes.iter().sum();
    let column_totals = largest_remainder(total, &ratios);
    let mut counts = vec![[0usize; 3]; class_sizes.len()];
    let mut cells = Vec::new();
    for (c, &n) in class_sizes.iter().enumerate() {
        for k in 0..3 {
            let exact = n as f64 * ratios[k];
            counts[c][k] = exact.floor() as usize;
            cells.push((exact - exact.floor(), c, k));
        }
    }
    let mut row_left: Vec<usize> = class_sizes
        .iter()
        .zip(&counts)
        .map(|(&n, row)| n - row.iter().sum::<usize>())
        .collect();
    let mut col_left: Vec<usize> = (0..3)
        .map(|k| column_totals[k] - counts.iter().map(|r| r[k]).sum::<usize>())
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    for &(_, c, k) in &cells {
        if row_left[c] > 0 && col_left[k] > 0 {
            counts[c][k] += 1;
            row_left[c] -= 1;
            col_left[k] -= 1;
        }
    }
    // Remaining deficits (possible when remainders tie awkwardly) are paired
    // up in index order; the row and column totals always agree.
    for c in 0..class_sizes.len() {
        for k in 0..3 {
            let take = row_left[c].min(col_left[k]);
            counts[c][k] += take;
            row_left[c] -= take;
            col_left[k] -= take;
        }
    }
    counts
}

/// Stratified split of the labeled nodes. Deterministic in `seed`.
pub fn make_splits(labels: &[i64], num_classes: usize, ratios: (f64, f64, f64), seed: u64) -> Result<Splits> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|x| !x.is_finite() || *x <= 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            let c = l as usize;
            if c >= num_classes {
                return Err(Error::Schema(format!("label {l} outside 0..{num_classes}")));
            }
            by_class[c].push(i);
        }
    }
    if let Some((c, ids)) = by_class.iter().enumerate().find(|(_, ids)| ids.len() < MIN_PER_CLASS) {
        return Err(Error::Stratification(format!(
            "class {c} has {} labeled nodes, at least {MIN_PER_CLASS} are needed",
            ids.len()
        )));
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let counts = class_split_counts(&sizes, r);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = Splits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (ids, [a, b, _]) in by_class.iter_mut().zip(counts) {
        ids.shuffle(&mut rng);
        splits.train.extend_from_slice(&ids[..a]);
        splits.val.extend_from_slice(&ids[a..a + b]);
        splits.test.extend_from_slice(&ids[a + b..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(per_class: usize, classes: usize) -> Vec<i64> {
        (0..per_class * classes).map(|i| (i / per_class) as i64).collect()
    }

    #[test]
    fn default_sizes() {
        let s = make_splits(&blocks(25, 4), 4, DEFAULT_SPLIT_RATIOS, 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (20, 10, 70));
    }

    #[test]
    fn stratified_sizes() {
        let labels = blocks(10, 3);
        let s = make_splits(&labels, 3, (0.6, 0.1, 0.3), 5).unwrap();
        for c in 0..3 {
            let count = |ids: &[usize]| ids.iter().filter(|&&i| labels[i] == c).count();
            assert_eq!((count(&s.train), count(&s.val), count(&s.test)), (6, 1, 3));
        }
    }

    #[test]
    fn disjoint_and_covering() {
        let mut labels = blocks(7, 3);
        labels.extend([-1, -1]);
        let s = make_splits(&labels, 3, DEFAULT_SPLIT_RATIOS, 9).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..21).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_in_seed() {
        let labels = blocks(20, 3);
        let a = make_splits(&labels, 3, DEFAULT_SPLIT_RATIOS, 1).unwrap();
        assert_eq!(a, make_splits(&labels, 3, DEFAULT_SPLIT_RATIOS, 1).unwrap());
        assert_ne!(a, make_splits(&labels, 3, DEFAULT_SPLIT_RATIOS, 2).unwrap());
    }

    #[test]
    fn rejects_small_class_and_bad_ratios() {
        let mut labels = blocks(5, 2);
        labels[9] = -1;
        labels[8] = -1;
        labels[7] = -1;
        assert!(matches!(
            make_splits(&labels, 2, DEFAULT_SPLIT_RATIOS, 0),
            Err(Error::Stratification(_))
        ));
        assert!(matches!(make_splits(&blocks(5, 2), 2, (0.5, 0.5, 0.5), 0), Err(Error::Config(_))));
        assert!(matches!(make_splits(&blocks(5, 2), 2, (1.0, 0.0, 0.0), 0), Err(Error::Config(_))));
    }

    #[test]
    fn counts_respect_both_margins() {
        let sizes = [3, 4, 5, 7, 11];
        let counts = class_split_counts(&sizes, [0.2, 0.1, 0.7]);
        let cols = largest_remainder(30, &[0.2, 0.1, 0.7]);
        for (row, n) in counts.iter().zip(sizes) {
            assert_eq!(row.iter().sum::<usize>(), n);
        }
        for k in 0..3 {
            assert_eq!(counts.iter().map(|r| r[k]).sum::<usize>(), cols[k]);
        }
    }
}
