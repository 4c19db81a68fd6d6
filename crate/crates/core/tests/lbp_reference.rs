#[path = "support/lbp_ref.rs"]
mod lbp_ref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salfold::lbp::{extract_features, lbp_code, uniform_map};
use salfold::{GrayImage, LbpParams};

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.gen_range(0..256) as f64)
}

#[test]
fn census_finds_58_uniform_codes() {
    let uniform: Vec<u8> = (0..=255u8).filter(|&c| lbp_ref::transitions(c) <= 2).collect();
    assert_eq!(uniform.len(), 58);
    let mut seen = [false; 58];
    for &c in &uniform {
        let b = uniform_map(c);
        assert!(b < 58);
        assert!(!seen[b], "bin {b} used twice");
        seen[b] = true;
    }
    let table = lbp_ref::bin_table();
    for c in 0..=255u8 {
        assert_eq!(uniform_map(c), table[c as usize]);
    }
}

#[test]
fn codes_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let img = random_image(&mut rng, 20, 20);
    for r in [1, 2, 3] {
        for y in r as usize..20 - r as usize {
            for x in r as usize..20 - r as usize {
                assert_eq!(lbp_code(&img, x, y, r).unwrap(), lbp_ref::code(&img, x, y, r));
            }
        }
    }
}

#[test]
fn features_match_reference_on_random_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for k in 0..100 {
        let img = random_image(&mut rng, 48, 48);
        let grid = if k % 2 == 0 { 4 } else { 3 };
        let fast = extract_features(&img, &LbpParams::with_grid(grid)).unwrap();
        let slow = lbp_ref::features(&img, grid, &[1, 2]);
        assert_eq!(fast.0, slow, "image {k}, grid {grid}");
    }
}

#[test]
fn uneven_sizes_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (w, h) in [(31, 47), (50, 29), (23, 23)] {
        let img = random_image(&mut rng, w, h);
        for grid in [3, 4] {
            let fast = extract_features(&img, &LbpParams::with_grid(grid)).unwrap();
            assert_eq!(fast.0, lbp_ref::features(&img, grid, &[1, 2]));
        }
    }
}
