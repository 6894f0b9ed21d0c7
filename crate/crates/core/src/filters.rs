//! Small raster kernels: Gaussian smoothing, box means, grey morphology and gradients.
//! Borders replicate the edge pixel.

use crate::grid::Grid;

fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k.into_iter().map(|v| v as f32).collect()
}

fn convolve_rows(src: &Grid<f32>, kernel: &[f32]) -> Grid<f32> {
    let (w, h) = (src.width(), src.height());
    let r = (kernel.len() / 2) as isize;
    let mut out = Grid::filled(w, h, 0.0f32);
    for row in 0..h {
        let line = &src.as_slice()[row * w..(row + 1) * w];
        for col in 0..w {
            let mut acc = 0.0f32;
            for (k, &kv) in kernel.iter().enumerate() {
                let c = (col as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * line[c];
            }
            out.set(row, col, acc);
        }
    }
    out
}

fn transpose(src: &Grid<f32>) -> Grid<f32> {
    Grid::from_fn(src.height(), src.width(), |r, c| src.at(c, r))
}

/// Separable Gaussian blur; `sigma <= 0` returns a copy.
pub fn gaussian_blur(src: &Grid<f32>, sigma: f64) -> Grid<f32> {
    if sigma <= 0.0 || src.width() == 0 || src.height() == 0 {
        return src.clone();
    }
    let k = gaussian_kernel(sigma);
    let rows = convolve_rows(src, &k);
    transpose(&convolve_rows(&transpose(&rows), &k))
}

/// Mean over the `(2 * radius + 1)` square window, shrunk at the borders.
pub fn box_mean(src: &Grid<f32>, radius: usize) -> Grid<f32> {
    let (w, h) = (src.width(), src.height());
    let mut integral = vec![0.0f64; (w + 1) * (h + 1)];
    for r in 0..h {
        let mut run = 0.0f64;
        for c in 0..w {
            run += src.at(r, c) as f64;
            integral[(r + 1) * (w + 1) + c + 1] = integral[r * (w + 1) + c + 1] + run;
        }
    }
    Grid::from_fn(w, h, |r, c| {
        let (r0, r1) = (r.saturating_sub(radius), (r + radius + 1).min(h));
        let (c0, c1) = (c.saturating_sub(radius), (c + radius + 1).min(w));
        let s = integral[r1 * (w + 1) + c1] - integral[r0 * (w + 1) + c1] - integral[r1 * (w + 1) + c0]
            + integral[r0 * (w + 1) + c0];
        (s / ((r1 - r0) * (c1 - c0)) as f64) as f32
    })
}

/// Offsets of a digital disk of the given radius.
pub fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let r2 = (radius * radius) as isize;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if dr * dr + dc * dc <= r2 {
                out.push((dr, dc));
            }
        }
    }
    out
}

fn rank_filter(src: &Grid<f32>, offsets: &[(isize, isize)], take_max: bool) -> Grid<f32> {
    let (w, h) = (src.width() as isize, src.height() as isize);
    Grid::from_fn(src.width(), src.height(), |r, c| {
        let mut best = if take_max { f32::NEG_INFINITY } else { f32::INFINITY };
        for &(dr, dc) in offsets {
            let rr = (r as isize + dr).clamp(0, h - 1) as usize;
            let cc = (c as isize + dc).clamp(0, w - 1) as usize;
            let v = src.at(rr, cc);
            best = if take_max { best.max(v) } else { best.min(v) };
        }
        best
    })
}

pub fn erode(src: &Grid<f32>, offsets: &[(isize, isize)]) -> Grid<f32> {
    rank_filter(src, offsets, false)
}

pub fn dilate(src: &Grid<f32>, offsets: &[(isize, isize)]) -> Grid<f32> {
    rank_filter(src, offsets, true)
}

/// White top-hat: the residue of a grey opening with a disk.
pub fn white_tophat(src: &Grid<f32>, radius: usize) -> Grid<f32> {
    let se = disk_offsets(radius);
    let opened = dilate(&erode(src, &se), &se);
    let data = src
        .as_slice()
        .iter()
        .zip(opened.as_slice())
        .map(|(&s, &o)| (s - o).max(0.0))
        .collect();
    Grid::from_vec(src.width(), src.height(), data)
}

/// Central-difference gradient magnitude.
pub fn gradient_magnitude(src: &Grid<f32>) -> Grid<f32> {
    let (w, h) = (src.width(), src.height());
    Grid::from_fn(w, h, |r, c| {
        let gx = (src.at(r, (c + 1).min(w - 1)) - src.at(r, c.saturating_sub(1))) / 2.0;
        let gy = (src.at((r + 1).min(h - 1), c) - src.at(r.saturating_sub(1), c)) / 2.0;
        gx.hypot(gy)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blur_preserves_constant() {
        let g = Grid::filled(9, 7, 5.0f32);
        let b = gaussian_blur(&g, 1.3);
        assert!(b.as_slice().iter().all(|&v| (v - 5.0).abs() < 1e-4));
    }

    #[test]
    fn blur_preserves_mass_in_interior() {
        let mut g = Grid::filled(21, 21, 0.0f32);
        g.set(10, 10, 100.0);
        let b = gaussian_blur(&g, 1.0);
        let sum: f32 = b.as_slice().iter().sum();
        assert!((sum - 100.0).abs() < 1e-2);
        assert_eq!(b.at(10, 10), b.as_slice().iter().cloned().fold(f32::MIN, f32::max));
    }

    #[test]
    fn box_mean_matches_naive() {
        let g = Grid::from_fn(6, 5, |r, c| (r * 7 + c * 3) as f32);
        let m = box_mean(&g, 1);
        let naive = |r: usize, c: usize| {
            let mut s = 0.0;
            let mut n = 0.0;
            for rr in r.saturating_sub(1)..(r + 2).min(5) {
                for cc in c.saturating_sub(1)..(c + 2).min(6) {
                    s += g.at(rr, cc);
                    n += 1.0;
                }
            }
            s / n
        };
        for r in 0..5 {
            for c in 0..6 {
                assert!((m.at(r, c) - naive(r, c)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn tophat_keeps_small_bright_objects_only() {
        let mut g = Grid::filled(40, 40, 50.0f32);
        for r in 10..13 {
            for c in 10..14 {
                g.set(r, c, 150.0);
            }
        }
        for r in 20..35 {
            for c in 20..35 {
                g.set(r, c, 150.0);
            }
        }
        let t = white_tophat(&g, 3);
        assert_eq!(t.at(11, 11), 100.0);
        assert_eq!(t.at(27, 27), 0.0);
        assert_eq!(t.at(0, 0), 0.0);
    }

    #[test]
    fn dark_object_has_no_tophat_response() {
        let mut g = Grid::filled(20, 20, 150.0f32);
        g.set(10, 10, 20.0);
        g.set(10, 11, 20.0);
        let t = white_tophat(&g, 2);
        assert!(t.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disk_sizes() {
        assert_eq!(disk_offsets(0).len(), 1);
        assert_eq!(disk_offsets(1).len(), 5);
        assert_eq!(disk_offsets(2).len(), 13);
    }
}
