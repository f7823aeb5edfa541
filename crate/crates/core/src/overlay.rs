//! Colour rendering of a planned graph over its floor plan.

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::imagecore::RasterImage;
use crate::skelgraph::{ConnectivityGraph, NodeKind, Origin, Skeleton};

const SKELETON: Rgb<u8> = Rgb([150, 200, 215]);
const EDGE: Rgb<u8> = Rgb([40, 160, 70]);
const DETECTED: Rgb<u8> = Rgb([30, 80, 230]);
const MANUAL: Rgb<u8> = Rgb([130, 40, 200]);
const INTERSECTION: Rgb<u8> = Rgb([225, 30, 30]);
const SPACER: Rgb<u8> = Rgb([170, 0, 60]);

/// Draws the skeleton, edge paths and beacons. Detected beacons are blue
/// solid circles and manually added ones purple circles. Beacons inserted by
/// the planner (intersections, spacers) are red solid triangles. Marker
/// radius follows `radius`, or 0.8% of the shorter image side when zero.
pub fn render_overlay(
    plan: &RasterImage,
    skeleton: Option<&Skeleton>,
    graph: &ConnectivityGraph,
    radius: u32,
) -> Result<RgbImage> {
    let (w, h) = (plan.width(), plan.height());
    if let Some(s) = skeleton {
        if s.mask.width() != w || s.mask.height() != h {
            return Err(Error::Dimension(format!(
                "skeleton {}x{} does not match plan {w}x{h}",
                s.mask.width(),
                s.mask.height()
            )));
        }
    }
    // Fade the plan so the markup stands out.
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = 110 + plan.get(x as usize, y as usize) as u32 * 145 / 255;
        Rgb([v as u8; 3])
    });
    if let Some(s) = skeleton {
        for (x, y) in s.mask.foreground() {
            img.put_pixel(x as u32, y as u32, SKELETON);
        }
    }
    for e in &graph.edges {
        for &[x, y] in &e.path {
            if (x as usize) < w && (y as usize) < h {
                img.put_pixel(x, y, EDGE);
            }
        }
    }
    let r = if radius > 0 { radius } else { ((w.min(h) as f64 * 0.008).round() as u32).max(3) };
    for n in &graph.nodes {
        let (cx, cy) = (n.x as i64, n.y as i64);
        match (n.kind, n.origin) {
            (NodeKind::Poi, Origin::Detected) => fill_circle(&mut img, cx, cy, r as i64, DETECTED),
            (NodeKind::Poi, Origin::Manual) => fill_circle(&mut img, cx, cy, r as i64, MANUAL),
            (NodeKind::Intersection, _) => fill_triangle(&mut img, cx, cy, r as i64, INTERSECTION),
            (NodeKind::Spacer, _) => fill_triangle(&mut img, cx, cy, r as i64, SPACER),
        }
    }
    Ok(img)
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn fill_circle(img: &mut RgbImage, cx: i64, cy: i64, r: i64, c: Rgb<u8>) {
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                put(img, cx + dx, cy + dy, c);
            }
        }
    }
}

/// Upward triangle with its centroid at the centre.
fn fill_triangle(img: &mut RgbImage, cx: i64, cy: i64, r: i64, c: Rgb<u8>) {
    let top = cy - r;
    let bottom = cy + r / 2;
    let height = (bottom - top).max(1);
    for y in top..=bottom {
        let half = (y - top) * r / height;
        for x in cx - half..=cx + half {
            put(img, x, y, c);
        }
    }
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(out.into_inner())
}
