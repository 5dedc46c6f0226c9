//! Synthetic piecewise-constant test images with known ground truth.
//!
//! Intensities follow the 8-bit levels of common retinal-vessel and brain MR
//! segmentation benchmarks so that normalized contrasts are comparable.

use crate::grid::{ImageGrid, LabelMask};

/// Background and vessel intensities.
pub const VESSEL_LEVELS: [f64; 2] = [104.0, 191.0];

/// Background, cerebrospinal fluid, grey matter, white matter.
pub const BRAIN_LEVELS: [f64; 4] = [10.0, 48.0, 106.0, 154.0];

fn render(height: usize, width: usize, levels: &[f64], label: impl Fn(f64, f64) -> usize) -> (ImageGrid, LabelMask) {
    let labels: Vec<usize> = (0..height * width)
        .map(|px| label((px / width) as f64, (px % width) as f64))
        .collect();
    let image = ImageGrid::new(height, width, labels.iter().map(|&l| levels[l]).collect())
        .expect("phantom intensities are finite");
    let mask = LabelMask::new(height, width, levels.len(), labels).expect("labels index the level table");
    (image, mask)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (cx * cx + cy * cy).sqrt()
}

/// Branching tree of thin bright vessels on a darker background. Segment
/// coordinates are given for a 128x128 frame and scaled to the requested size.
pub fn vessel_tree(height: usize, width: usize) -> (ImageGrid, LabelMask) {
    // (row0, col0, row1, col1, radius)
    const SEGMENTS: [(f64, f64, f64, f64, f64); 9] = [
        (6.0, 64.0, 60.0, 58.0, 3.0),
        (60.0, 58.0, 122.0, 72.0, 2.5),
        (60.0, 58.0, 28.0, 112.0, 2.0),
        (60.0, 58.0, 18.0, 14.0, 1.8),
        (92.0, 65.0, 122.0, 22.0, 1.5),
        (92.0, 65.0, 116.0, 112.0, 1.5),
        (34.0, 60.0, 6.0, 100.0, 1.2),
        (44.0, 86.0, 70.0, 120.0, 1.2),
        (38.0, 36.0, 80.0, 8.0, 1.2),
    ];
    let (sy, sx) = (height as f64 / 128.0, width as f64 / 128.0);
    let scale = sy.min(sx);
    render(height, width, &VESSEL_LEVELS, |i, j| {
        let hit = SEGMENTS.iter().any(|&(r0, c0, r1, c1, rad)| {
            segment_distance((i, j), (r0 * sy, c0 * sx), (r1 * sy, c1 * sx)) <= rad * scale
        });
        usize::from(hit)
    })
}

/// Axial-slice-like head: background, a CSF shell, a grey-matter ring, a
/// white-matter core and two CSF ventricles.
pub fn brain_slice(height: usize, width: usize) -> (ImageGrid, LabelMask) {
    let (cy, cx) = (height as f64 / 2.0, width as f64 / 2.0);
    let (ry, rx) = (0.44 * height as f64, 0.44 * width as f64);
    render(height, width, &BRAIN_LEVELS, |i, j| {
        let (y, x) = ((i - cy) / ry, (j - cx) / rx);
        let r = (y * y + x * x).sqrt();
        // folded grey/white boundary
        let angle = y.atan2(x);
        let wm_edge = 0.62 + 0.06 * (6.0 * angle).cos();
        let ventricle = |vy: f64, vx: f64| {
            let (dy, dx) = ((y - vy) / 0.22, (x - vx) / 0.09);
            dy * dy + dx * dx <= 1.0
        };
        if r > 1.0 {
            0
        } else if r > 0.86 || ventricle(-0.05, -0.16) || ventricle(-0.05, 0.16) {
            1
        } else if r > wm_edge {
            2
        } else {
            3
        }
    })
}

/// A bright disk on a dark background, levels 0 and 1.
pub fn two_phase_disk(height: usize, width: usize) -> (ImageGrid, LabelMask) {
    let (cy, cx) = (height as f64 / 2.0, width as f64 / 2.0);
    let r = 0.3 * height.min(width) as f64;
    render(height, width, &[0.0, 1.0], |i, j| {
        usize::from((i - cy).powi(2) + (j - cx).powi(2) <= r * r)
    })
}
