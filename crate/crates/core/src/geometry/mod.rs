//! Polygon rasterization onto the image grid and run-length mask algebra.

mod raster;
mod rle;

pub use raster::rasterize_polygon;
pub(crate) use rle::iou_from_areas;
pub use rle::{
    intersection_area, mask_area, mask_intersection, mask_iou, mask_union, Grid, RleMask, Run,
};
