#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson goodness-of-fit p-value. Adjacent cells are merged left to right
/// until each expected count is at least 5; the remainder joins the last cell.
pub fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(probs) {
        o += ob as f64;
        e += p * total as f64;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    assert!(cells.len() >= 2, "too few cells for a chi-square test");
    let stat: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    ChiSquared::new((cells.len() - 1) as f64).unwrap().sf(stat)
}

/// Histogram of `values` over `0..len`, values past the end in the last cell.
pub fn histogram(values: impl IntoIterator<Item = usize>, len: usize) -> Vec<u64> {
    let mut h = vec![0u64; len];
    for v in values {
        h[v.min(len - 1)] += 1;
    }
    h
}
