use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower_edge: f64,
    pub count: usize,
}

/// Edge values are rounded to 12 decimals so that `-1 + i * w` prints as the
/// decimal the user expects (`-0.9`, not `-0.8999999999999999`).
fn edge(i: usize, width: f64) -> f64 {
    let x = -1.0 + i as f64 * width;
    (x * 1e12).round() / 1e12
}

/// Fixed-width histogram over `[-1, 1]`: bins are left-closed and right-open,
/// except the last, which also holds 1.0.
pub fn histogram<I>(scores: I, bin_width: f64) -> Result<Vec<HistogramBin>>
where
    I: IntoIterator<Item = f64>,
{
    if !(bin_width > 0.0 && bin_width <= 2.0) {
        return Err(Error::invalid(format!(
            "bin width must be in (0, 2], got {bin_width}"
        )));
    }
    let n = ((2.0 / bin_width) - 1e-9).ceil().max(1.0) as usize;
    let mut bins: Vec<HistogramBin> = (0..n)
        .map(|i| HistogramBin {
            lower_edge: edge(i, bin_width),
            count: 0,
        })
        .collect();
    for s in scores {
        if !(-1.0..=1.0).contains(&s) {
            return Err(Error::ScoreOutOfRange(s));
        }
        let mut i = (((s + 1.0) / bin_width).floor() as usize).min(n - 1);
        // Settle float noise against the reported edges.
        while i + 1 < n && s >= bins[i + 1].lower_edge {
            i += 1;
        }
        while i > 0 && s < bins[i].lower_edge {
            i -= 1;
        }
        bins[i].count += 1;
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_width_bins() {
        let h = histogram([0.5, 0.5, 0.95], 0.5).unwrap();
        let edges: Vec<f64> = h.iter().map(|b| b.lower_edge).collect();
        assert_eq!(edges, vec![-1.0, -0.5, 0.0, 0.5]);
        let counts: Vec<usize> = h.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![0, 0, 0, 3]);
    }

    #[test]
    fn empty_and_edges() {
        let h = histogram(std::iter::empty(), 0.1).unwrap();
        assert_eq!(h.len(), 20);
        assert!(h.iter().all(|b| b.count == 0));
        assert_eq!(h[1].lower_edge, -0.9);

        let h = histogram([1.0, -1.0], 0.1).unwrap();
        assert_eq!(h[19].count, 1);
        assert_eq!(h[0].count, 1);
    }

    #[test]
    fn threshold_values_land_in_their_own_bin() {
        let h = histogram([0.45, 0.85], 0.05).unwrap();
        let at = |x: f64| h.iter().position(|b| b.lower_edge == x).unwrap();
        assert_eq!(h[at(0.45)].count, 1);
        assert_eq!(h[at(0.85)].count, 1);
    }

    #[test]
    fn invalid_width() {
        assert!(histogram([0.0], 0.0).is_err());
        assert!(histogram([0.0], 2.5).is_err());
        assert!(histogram([0.0], f64::NAN).is_err());
        assert!(histogram([1.5], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn counts_are_conserved(scores in prop::collection::vec(-1.0f64..=1.0, 0..200), w in 0.01f64..=2.0) {
            let h = histogram(scores.iter().copied(), w).unwrap();
            prop_assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), scores.len());
        }
    }
}
