//! Binary morphology: erosion/dilation with square structuring elements,
//! connected components, and boundary extraction.
//!
//! Pixels outside the grid count as background throughout: erosion eats into
//! mask pixels at the grid edge and dilation clips at it.

use serde::{Deserialize, Serialize};

use crate::mask::Mask;

/// Pixel connectivity for component analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

/// Horizontal then vertical pass of a window AND (erosion) or OR (dilation).
/// The square element is separable into the two 1D passes.
fn separable_pass(mask: &Mask, radius: usize, all: bool) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.w, mask.h);
    let r = radius as isize;
    let mut mid = Mask::new(w, h);
    for y in 0..h {
        let row = &mask.data[y * w..(y + 1) * w];
        let out = &mut mid.data[y * w..(y + 1) * w];
        for x in 0..w as isize {
            let mut acc = all;
            for dx in -r..=r {
                let xx = x + dx;
                let v = if xx < 0 || xx >= w as isize { false } else { row[xx as usize] };
                if all {
                    acc &= v;
                } else {
                    acc |= v;
                }
            }
            out[x as usize] = acc;
        }
    }
    let mut out = Mask::new(w, h);
    for x in 0..w {
        for y in 0..h as isize {
            let mut acc = all;
            for dy in -r..=r {
                let yy = y + dy;
                let v = if yy < 0 || yy >= h as isize {
                    false
                } else {
                    mid.data[yy as usize * w + x]
                };
                if all {
                    acc &= v;
                } else {
                    acc |= v;
                }
            }
            out.data[y as usize * w + x] = acc;
        }
    }
    out
}

/// Erosion by a square element of half-width `radius`.
pub fn erode(mask: &Mask, radius: usize) -> Mask {
    separable_pass(mask, radius, true)
}

/// Dilation by a square element of half-width `radius`.
pub fn dilate(mask: &Mask, radius: usize) -> Mask {
    separable_pass(mask, radius, false)
}

/// Labels connected components in row-major discovery order.
///
/// Returns per-pixel labels (0 = background, components numbered from 1) and
/// the component count. Component k's smallest row-major pixel index is
/// strictly below component k+1's.
pub fn label_components(mask: &Mask, connectivity: Connectivity) -> (Vec<u32>, u32) {
    let (w, h) = (mask.w, mask.h);
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    let offsets = connectivity.offsets();
    for start in 0..w * h {
        if !mask.data[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let x = (idx % w) as isize;
            let y = (idx / w) as isize;
            for &(dx, dy) in offsets {
                let nx = x + dx;
                let ny = y + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if mask.data[nidx] && labels[nidx] == 0 {
                    labels[nidx] = next;
                    stack.push(nidx);
                }
            }
        }
    }
    (labels, next)
}

/// Keeps only the largest connected component. Ties go to the component with
/// the smallest row-major pixel index (the first one discovered).
pub fn largest_component(mask: &Mask, connectivity: Connectivity) -> Mask {
    let (labels, count) = label_components(mask, connectivity);
    if count <= 1 {
        return mask.clone();
    }
    let mut areas = vec![0u64; count as usize + 1];
    for &l in &labels {
        areas[l as usize] += u64::from(l != 0);
    }
    let mut best = 1u32;
    for l in 2..=count {
        if areas[l as usize] > areas[best as usize] {
            best = l;
        }
    }
    let mut out = Mask::new(mask.w, mask.h);
    for (slot, &l) in out.data.iter_mut().zip(labels.iter()) {
        *slot = l == best;
    }
    out
}

/// Mask pixels with at least one 4-neighbor outside the mask. The grid edge
/// counts as outside.
pub fn boundary(mask: &Mask) -> Mask {
    let (w, h) = (mask.w, mask.h);
    let mut out = Mask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let exposed = x == 0
                || y == 0
                || x == w - 1
                || y == h - 1
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1);
            out.set(x, y, exposed);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&str]) -> Mask {
        let h = rows.len();
        let w = rows[0].len();
        Mask::from_fn(w, h, |x, y| rows[y].as_bytes()[x] == b'X')
    }

    #[test]
    fn erode_then_dilate_restores_solid_square() {
        let m = from_rows(&["XXXXX", "XXXXX", "XXXXX", "XXXXX", "XXXXX"]);
        let e = erode(&m, 1);
        assert_eq!(e.area(), 9);
        assert!(e.get(1, 1) && e.get(3, 3) && !e.get(0, 0) && !e.get(4, 2));
        let d = dilate(&e, 1);
        assert_eq!(d, m);
    }

    #[test]
    fn dilate_clips_at_grid_edge() {
        let mut m = Mask::new(3, 3);
        m.set(0, 0, true);
        let d = dilate(&m, 1);
        assert_eq!(d.area(), 4);
        assert!(d.get(0, 0) && d.get(1, 0) && d.get(0, 1) && d.get(1, 1));
    }

    #[test]
    fn components_discovered_in_row_major_order() {
        let m = from_rows(&["X..X", "....", "X..X"]);
        let (labels, count) = label_components(&m, Connectivity::Four);
        assert_eq!(count, 4);
        assert_eq!(labels[0], 1);
        assert_eq!(labels[3], 2);
        assert_eq!(labels[8], 3);
        assert_eq!(labels[11], 4);
    }

    #[test]
    fn four_vs_eight_connectivity_on_diagonal() {
        let m = from_rows(&["X.", ".X"]);
        let (_, c4) = label_components(&m, Connectivity::Four);
        let (_, c8) = label_components(&m, Connectivity::Eight);
        assert_eq!(c4, 2);
        assert_eq!(c8, 1);
    }

    #[test]
    fn largest_component_tie_breaks_to_first_discovered() {
        let m = from_rows(&["XX.XX", ".....", "....."]);
        let kept = largest_component(&m, Connectivity::Four);
        assert!(kept.get(0, 0) && kept.get(1, 0));
        assert!(!kept.get(3, 0) && !kept.get(4, 0));
    }

    #[test]
    fn boundary_of_square_is_its_ring() {
        let m = from_rows(&["....", ".XX.", ".XX.", "...."]);
        let b = boundary(&m);
        assert_eq!(b, m); // 2x2 block has no interior
        let solid = Mask::from_fn(5, 5, |_, _| true);
        let b = boundary(&solid);
        assert_eq!(b.area(), 16);
        assert!(!b.get(2, 2));
    }
}
