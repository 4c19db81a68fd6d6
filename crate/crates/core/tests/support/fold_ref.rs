//! Exhaustive fold scoring straight from the template pixels.
#![allow(dead_code)]

use salfold::SaliencyMap;

fn bounds(len: usize, n: usize) -> Vec<usize> {
    let (base, extra) = (len / n, len % n);
    (0..=n).map(|i| i * base + i.min(extra)).collect()
}

/// Mass of each block column (`by_column`) or block row.
pub fn masses(map: &SaliencyMap, n: usize, by_column: bool) -> Vec<f64> {
    let (w, h) = map.shape();
    let b = if by_column { bounds(w, n) } else { bounds(h, n) };
    (0..n)
        .map(|s| {
            let mut m = 0.0;
            for y in 0..h {
                for x in 0..w {
                    let along = if by_column { x } else { y };
                    if along >= b[s] && along < b[s + 1] {
                        m += map.get(x, y);
                    }
                }
            }
            m
        })
        .collect()
}

/// Smallest moved-strip mass over all adjacent pairs.
pub fn best_adjacent_score(masses: &[f64]) -> f64 {
    masses
        .windows(2)
        .map(|p| p[0].min(p[1]))
        .fold(f64::INFINITY, f64::min)
}
