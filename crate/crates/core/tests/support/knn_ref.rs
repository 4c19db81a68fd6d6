//! Brute-force patch neighbours: every distance computed from scratch and the
//! whole list sorted.
#![allow(dead_code)]

use salfold::GrayImage;

fn patch(img: &GrayImage, i: usize, size: usize) -> Vec<f64> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let (x, y) = ((i as isize) % w, (i as isize) / w);
    let half = (size / 2) as isize;
    let mut out = Vec::new();
    for dy in -half..=half {
        for dx in -half..=half {
            let xx = (x + dx).max(0).min(w - 1) as usize;
            let yy = (y + dy).max(0).min(h - 1) as usize;
            out.push(img.get(xx, yy));
        }
    }
    out
}

pub fn distance(img: &GrayImage, size: usize, c: f64, i: usize, j: usize) -> f64 {
    let (p, q) = (patch(img, i, size), patch(img, j, size));
    let sq: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
    let d_int = sq.sqrt() / (255.0 * ((size * size) as f64).sqrt());
    let w = img.width();
    let (xi, yi, xj, yj) = ((i % w) as f64, (i / w) as f64, (j % w) as f64, (j / w) as f64);
    let d_pos = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt() / img.width().max(img.height()) as f64;
    d_int / (1.0 + c * d_pos)
}

pub fn nearest(img: &GrayImage, size: usize, c: f64, k: usize, i: usize) -> Vec<(f64, usize)> {
    let n = img.width() * img.height();
    let mut all: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (distance(img, size, c, i, j), j)).collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

pub fn saliency(img: &GrayImage, size: usize, c: f64, k: usize, i: usize) -> f64 {
    let nn = nearest(img, size, c, k, i);
    let mean = nn.iter().map(|p| p.0).sum::<f64>() / nn.len() as f64;
    1.0 - (-mean).exp()
}
