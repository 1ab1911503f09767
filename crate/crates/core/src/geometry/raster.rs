use super::rle::{Grid, RleMask, RunBuilder};
use crate::annotation::{Polygon, Vertex};

/// Scanline rasterization under the pixel-center even-odd rule.
///
/// Pixel `(i, j)` is set iff `(i + 0.5, j + 0.5)` is inside the polygon.
/// Edges are half-open in y (`y_min <= y < y_max`) and a center lying on a
/// crossing counts towards it, so centers on left and top edges are inside
/// while centers on right and bottom edges are not. Out-of-grid pixels are
/// dropped.
pub fn rasterize_polygon(polygon: &Polygon, grid: Grid) -> RleMask {
    let vs = polygon.vertices();
    let (_, min_y, _, max_y) = polygon.bounds();
    let (w, h) = (grid.width(), grid.height());
    let first_row = first_center_at_or_after(min_y, h);
    let end_row = first_center_at_or_after(max_y, h);

    let mut out = RunBuilder::new();
    let mut crossings: Vec<f64> = Vec::with_capacity(vs.len());
    for row in first_row..end_row {
        let y = f64::from(row) + 0.5;
        crossings.clear();
        for (k, a) in vs.iter().enumerate() {
            let b = &vs[(k + 1) % vs.len()];
            if let Some(x) = edge_crossing(a, b, y) {
                crossings.push(x);
            }
        }
        crossings.sort_unstable_by(f64::total_cmp);
        for pair in crossings.chunks_exact(2) {
            let x0 = first_center_at_or_after(pair[0], w);
            let x1 = first_center_at_or_after(pair[1], w);
            if x0 < x1 {
                out.push(grid.index(x0, row), x1 - x0);
            }
        }
    }
    out.finish(grid)
}

/// x where the edge crosses the horizontal line at `y`, if it does.
fn edge_crossing(a: &Vertex, b: &Vertex, y: f64) -> Option<f64> {
    let (top, bottom) = if a.y < b.y { (a, b) } else { (b, a) };
    if top.y == bottom.y || y < top.y || y >= bottom.y {
        return None;
    }
    Some(top.x + (y - top.y) * (bottom.x - top.x) / (bottom.y - top.y))
}

/// Smallest pixel index `i` in `0..=limit` with `i + 0.5 >= coord`.
fn first_center_at_or_after(coord: f64, limit: u32) -> u32 {
    let guess = (coord - 0.5).ceil();
    if guess <= 0.0 {
        return 0;
    }
    if guess >= f64::from(limit) {
        // Only the exact predicate decides the boundary value.
        return if f64::from(limit - 1) + 0.5 >= coord { limit - 1 } else { limit };
    }
    let mut i = guess as u32;
    while i < limit && f64::from(i) + 0.5 < coord {
        i += 1;
    }
    while i > 0 && f64::from(i - 1) + 0.5 >= coord {
        i -= 1;
    }
    i
}
