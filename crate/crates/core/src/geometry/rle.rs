use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Pixel grid of an image. Pixel `(x, y)` has row-major index `y * width + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    width: u32,
    height: u32,
}

impl Grid {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract(format!("grid {width}x{height} is empty")));
        }
        if u64::from(width) * u64::from(height) > u64::from(u32::MAX) {
            return Err(Error::contract(format!("grid {width}x{height} is too large")));
        }
        Ok(Grid { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn area(&self) -> u32 {
        self.width * self.height
    }

    pub fn index(&self, x: u32, y: u32) -> u32 {
        y * self.width + x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Run {
    pub start: u32,
    pub len: u32,
}

impl Run {
    pub fn end(&self) -> u32 {
        self.start + self.len
    }
}

/// Row-major run-length encoded binary mask.
///
/// Runs are sorted, non-empty, non-overlapping and non-adjacent, so two masks
/// hold the same pixels exactly when their run lists are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RleMask {
    grid: Grid,
    runs: Vec<Run>,
}

/// Appends sorted runs and coalesces overlapping or touching ones.
pub(crate) struct RunBuilder {
    runs: Vec<Run>,
}

impl RunBuilder {
    pub(crate) fn new() -> Self {
        RunBuilder { runs: Vec::new() }
    }

    /// `start` must not be smaller than the start of the previous push.
    pub(crate) fn push(&mut self, start: u32, len: u32) {
        if len == 0 {
            return;
        }
        let end = start + len;
        if let Some(last) = self.runs.last_mut() {
            debug_assert!(start >= last.start);
            if start <= last.end() {
                last.len = last.len.max(end - last.start);
                return;
            }
        }
        self.runs.push(Run { start, len });
    }

    pub(crate) fn finish(self, grid: Grid) -> RleMask {
        RleMask {
            grid,
            runs: self.runs,
        }
    }
}

impl RleMask {
    pub fn empty(grid: Grid) -> Self {
        RleMask {
            grid,
            runs: Vec::new(),
        }
    }

    pub fn full(grid: Grid) -> Self {
        RleMask {
            grid,
            runs: vec![Run {
                start: 0,
                len: grid.area(),
            }],
        }
    }

    /// Builds a canonical mask from arbitrary runs (any order, may overlap).
    pub fn from_runs(grid: Grid, runs: impl IntoIterator<Item = Run>) -> Result<Self> {
        let mut runs: Vec<Run> = runs.into_iter().filter(|r| r.len > 0).collect();
        if let Some(bad) = runs
            .iter()
            .find(|r| u64::from(r.start) + u64::from(r.len) > u64::from(grid.area()))
        {
            return Err(Error::contract(format!(
                "run {}+{} exceeds grid area {}",
                bad.start,
                bad.len,
                grid.area()
            )));
        }
        runs.sort_unstable_by_key(|r| r.start);
        let mut b = RunBuilder::new();
        for r in runs {
            b.push(r.start, r.len);
        }
        Ok(b.finish(grid))
    }

    pub fn from_dense(grid: Grid, pixels: &[bool]) -> Result<Self> {
        if pixels.len() != grid.area() as usize {
            return Err(Error::contract(format!(
                "dense mask has {} pixels, grid has {}",
                pixels.len(),
                grid.area()
            )));
        }
        let mut b = RunBuilder::new();
        for (i, _) in pixels.iter().enumerate().filter(|(_, &on)| on) {
            b.push(i as u32, 1);
        }
        Ok(b.finish(grid))
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut out = vec![false; self.grid.area() as usize];
        for r in &self.runs {
            out[r.start as usize..r.end() as usize].fill(true);
        }
        out
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.runs.iter().map(|r| u64::from(r.len)).sum()
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        if x >= self.grid.width || y >= self.grid.height {
            return false;
        }
        let idx = self.grid.index(x, y);
        let pos = self.runs.partition_point(|r| r.end() <= idx);
        self.runs.get(pos).is_some_and(|r| r.start <= idx)
    }

    /// Pixel-space bounding box `(x0, y0, x1, y1)`, inclusive, or `None` when
    /// empty.
    pub fn bounds(&self) -> Option<(u32, u32, u32, u32)> {
        let first = self.runs.first()?;
        let last = self.runs.last()?;
        let w = self.grid.width;
        let (y0, y1) = (first.start / w, (last.end() - 1) / w);
        let (mut x0, mut x1) = (w - 1, 0);
        for r in &self.runs {
            let (ra, rb) = (r.start / w, (r.end() - 1) / w);
            if ra != rb {
                return Some((0, y0, w - 1, y1));
            }
            x0 = x0.min(r.start % w);
            x1 = x1.max((r.end() - 1) % w);
        }
        Some((x0, y0, x1, y1))
    }

    /// Plain PBM (`P1`) text image, for debugging.
    pub fn to_pbm(&self) -> String {
        let (w, h) = (self.grid.width, self.grid.height);
        let dense = self.to_dense();
        let mut out = format!("P1\n{w} {h}\n");
        for row in dense.chunks(w as usize) {
            let line: Vec<&str> = row.iter().map(|&on| if on { "1" } else { "0" }).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

fn same_grid(a: Grid, b: Grid) -> Result<()> {
    if a != b {
        return Err(Error::contract(format!(
            "masks on different grids: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Union of masks. The empty list has no grid, so the caller supplies it.
pub fn mask_union(grid: Grid, masks: &[&RleMask]) -> Result<RleMask> {
    for m in masks {
        same_grid(grid, m.grid)?;
    }
    match masks {
        [] => return Ok(RleMask::empty(grid)),
        [only] => return Ok((*only).clone()),
        _ => {}
    }
    let mut runs: Vec<Run> = masks.iter().flat_map(|m| m.runs.iter().copied()).collect();
    runs.sort_unstable_by_key(|r| r.start);
    let mut b = RunBuilder::new();
    for r in runs {
        b.push(r.start, r.len);
    }
    Ok(b.finish(grid))
}

pub fn mask_intersection(a: &RleMask, b: &RleMask) -> Result<RleMask> {
    same_grid(a.grid, b.grid)?;
    let mut out = RunBuilder::new();
    let (mut i, mut j) = (0, 0);
    while i < a.runs.len() && j < b.runs.len() {
        let (ra, rb) = (a.runs[i], b.runs[j]);
        let lo = ra.start.max(rb.start);
        let hi = ra.end().min(rb.end());
        if lo < hi {
            out.push(lo, hi - lo);
        }
        if ra.end() < rb.end() {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(out.finish(a.grid))
}

pub fn intersection_area(a: &RleMask, b: &RleMask) -> Result<u64> {
    same_grid(a.grid, b.grid)?;
    let mut total = 0u64;
    let (mut i, mut j) = (0, 0);
    while i < a.runs.len() && j < b.runs.len() {
        let (ra, rb) = (a.runs[i], b.runs[j]);
        let lo = ra.start.max(rb.start);
        let hi = ra.end().min(rb.end());
        if lo < hi {
            total += u64::from(hi - lo);
        }
        if ra.end() < rb.end() {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(total)
}

pub fn mask_area(a: &RleMask) -> u64 {
    a.area()
}

/// `|a ∩ b| / |a ∪ b|`, and 0 when both masks are empty.
pub fn mask_iou(a: &RleMask, b: &RleMask) -> Result<f64> {
    let inter = intersection_area(a, b)?;
    Ok(iou_from_areas(inter, a.area(), b.area()))
}

pub(crate) fn iou_from_areas(inter: u64, area_a: u64, area_b: u64) -> f64 {
    let union = area_a + area_b - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: u32, h: u32) -> Grid {
        Grid::new(w, h).unwrap()
    }

    #[test]
    fn grid_rejects_zero_and_overflow() {
        assert!(Grid::new(0, 3).is_err());
        assert!(Grid::new(70_000, 70_000).is_err());
    }

    #[test]
    fn from_runs_coalesces_adjacent_and_overlapping() {
        let g = grid(10, 1);
        let m = RleMask::from_runs(
            g,
            [
                Run { start: 5, len: 2 },
                Run { start: 0, len: 2 },
                Run { start: 2, len: 1 },
                Run { start: 6, len: 3 },
            ],
        )
        .unwrap();
        assert_eq!(m.runs(), &[Run { start: 0, len: 3 }, Run { start: 5, len: 4 }]);
        assert!(RleMask::from_runs(g, [Run { start: 8, len: 3 }]).is_err());
    }

    #[test]
    fn runs_merge_across_row_boundaries() {
        let g = grid(3, 2);
        let m = RleMask::from_dense(g, &[false, true, true, true, false, false]).unwrap();
        assert_eq!(m.runs(), &[Run { start: 1, len: 3 }]);
        assert_eq!(m.bounds(), Some((0, 0, 2, 1)));
    }

    #[test]
    fn area_cases() {
        let g = grid(4, 4);
        assert_eq!(mask_area(&RleMask::empty(g)), 0);
        assert_eq!(mask_area(&RleMask::full(g)), 16);
    }

    #[test]
    fn empty_union_and_self_union() {
        let g = grid(4, 4);
        assert_eq!(mask_union(g, &[]).unwrap(), RleMask::empty(g));
        let m = RleMask::from_runs(g, [Run { start: 1, len: 2 }, Run { start: 9, len: 2 }]).unwrap();
        assert_eq!(mask_union(g, &[&m, &m]).unwrap(), m);
    }

    #[test]
    fn mixed_grids_are_contract_errors() {
        let a = RleMask::full(grid(4, 4));
        let b = RleMask::full(grid(4, 5));
        assert!(matches!(mask_iou(&a, &b), Err(Error::Contract(_))));
        assert!(matches!(mask_union(a.grid(), &[&a, &b]), Err(Error::Contract(_))));
    }

    #[test]
    fn iou_identity_disjoint_and_empty() {
        let g = grid(4, 4);
        let a = RleMask::from_runs(g, [Run { start: 0, len: 2 }]).unwrap();
        let b = RleMask::from_runs(g, [Run { start: 8, len: 2 }]).unwrap();
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &b).unwrap(), 0.0);
        assert_eq!(mask_iou(&RleMask::empty(g), &RleMask::empty(g)).unwrap(), 0.0);
    }

    #[test]
    fn contains_and_pbm() {
        let g = grid(3, 2);
        let m = RleMask::from_runs(g, [Run { start: 1, len: 1 }, Run { start: 5, len: 1 }]).unwrap();
        assert!(m.contains(1, 0));
        assert!(m.contains(2, 1));
        assert!(!m.contains(0, 0));
        assert!(!m.contains(3, 0));
        assert_eq!(m.to_pbm(), "P1\n3 2\n0 1 0\n0 0 1\n");
    }
}
