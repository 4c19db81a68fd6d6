//! Straightforward LBP reference: one pixel at a time, no precomputation.
#![allow(dead_code)]

use salfold::GrayImage;

/// Number of circular 0/1 transitions of an 8-bit pattern.
pub fn transitions(code: u8) -> u32 {
    let bits: Vec<u8> = (0..8).map(|k| (code >> k) & 1).collect();
    (0..8).filter(|&k| bits[k] != bits[(k + 1) % 8]).count() as u32
}

/// Bin table built by counting: uniform codes in ascending order, then 58.
pub fn bin_table() -> [usize; 256] {
    let mut table = [58; 256];
    let mut next = 0;
    for code in 0..=255u8 {
        if transitions(code) <= 2 {
            table[code as usize] = next;
            next += 1;
        }
    }
    table
}

fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() < 1e-9 {
        v.round()
    } else {
        v
    }
}

pub fn code(img: &GrayImage, x: usize, y: usize, r: u32) -> u8 {
    let center = img.get(x, y);
    let mut code = 0u8;
    for k in 0..8 {
        let theta = std::f64::consts::PI * k as f64 / 4.0;
        let ox = snap(r as f64 * theta.cos());
        let oy = snap(-(r as f64) * theta.sin());
        // Sample relative to the pixel so weights only depend on the offset.
        let (fx0, fy0) = (ox.floor(), oy.floor());
        let v = interpolate_at(img, x, y, fx0 as isize, fy0 as isize, ox - fx0, oy - fy0);
        if v >= center {
            code |= 1 << k;
        }
    }
    code
}

fn interpolate_at(img: &GrayImage, x: usize, y: usize, dx: isize, dy: isize, fx: f64, fy: f64) -> f64 {
    let xi = (x as isize + dx) as usize;
    let yi = (y as isize + dy) as usize;
    if fx == 0.0 && fy == 0.0 {
        return img.get(xi, yi);
    }
    let a = img.get(xi, yi);
    let b = img.get(xi + 1, yi);
    let c = img.get(xi, yi + 1);
    let d = img.get(xi + 1, yi + 1);
    (1.0 - fx) * (1.0 - fy) * a + fx * (1.0 - fy) * b + (1.0 - fx) * fy * c + fx * fy * d
}

fn bounds(len: usize, n: usize) -> Vec<usize> {
    // Remainder pixels go to the leading cells.
    let (base, extra) = (len / n, len % n);
    (0..=n).map(|i| i * base + i.min(extra)).collect()
}

/// Histograms for a `grid`x`grid` layout with uniform bins, cell-major and
/// then radius.
pub fn features(img: &GrayImage, grid: usize, radii: &[u32]) -> Vec<f64> {
    let table = bin_table();
    let (w, h) = (img.width(), img.height());
    let xs = bounds(w, grid);
    let ys = bounds(h, grid);
    let mut out = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            for &r in radii {
                let ru = r as usize;
                let mut hist = vec![0u32; 59];
                let mut total = 0u32;
                for y in ys[i]..ys[i + 1] {
                    for x in xs[j]..xs[j + 1] {
                        if x < ru || y < ru || x + ru >= w || y + ru >= h {
                            continue;
                        }
                        hist[table[code(img, x, y, r) as usize]] += 1;
                        total += 1;
                    }
                }
                out.extend(hist.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }));
            }
        }
    }
    out
}
