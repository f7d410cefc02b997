//! PNG renderings of segmentations.

use crate::error::Result;
use crate::labels::SuperpixelMap;
use crate::raster::RasterImage;

const BOUNDARY: [u8; 3] = [255, 255, 0];

fn check(img: &RasterImage, map: &SuperpixelMap) -> Result<()> {
    if img.dimensions() != (map.width(), map.height()) {
        return Err(crate::Error::Input(format!(
            "image is {}x{} but the label map is {}x{}",
            img.width(),
            img.height(),
            map.width(),
            map.height()
        )));
    }
    Ok(())
}

/// Paints pixels whose right or lower neighbour has a different label.
pub fn boundary_overlay(img: &RasterImage, map: &SuperpixelMap) -> Result<RasterImage> {
    check(img, map)?;
    let (w, h) = img.dimensions();
    RasterImage::from_fn(w, h, |x, y| {
        let l = map.label_at(x, y);
        let edge = (x + 1 < w && map.label_at(x + 1, y) != l) || (y + 1 < h && map.label_at(x, y + 1) != l);
        if edge {
            BOUNDARY
        } else {
            img.pixel(x, y)
        }
    })
}

/// Fills every superpixel with its mean color.
pub fn mean_color(img: &RasterImage, map: &SuperpixelMap) -> Result<RasterImage> {
    check(img, map)?;
    let mut sums = vec![[0u64; 4]; map.ns()];
    for (p, &l) in img.pixels().iter().zip(map.labels()) {
        let s = &mut sums[l as usize];
        for c in 0..3 {
            s[c] += p[c] as u64;
        }
        s[3] += 1;
    }
    let means: Vec<[u8; 3]> = sums
        .iter()
        .map(|s| {
            let n = s[3].max(1);
            [0, 1, 2].map(|c| ((s[c] + n / 2) / n) as u8)
        })
        .collect();
    let (w, h) = img.dimensions();
    RasterImage::from_fn(w, h, |x, y| means[map.label_at(x, y) as usize])
}
