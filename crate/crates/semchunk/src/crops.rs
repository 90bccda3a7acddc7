//! Crop rendering: extract chunk sub-images from page images as PNG.
//! File naming is `{page_id}__{order_index}.png`.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::chunker::Chunk;
use crate::error::{Error, Result};

/// Load a page image from disk.
pub fn load_page_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| {
        Error::InvalidInput(format!("cannot decode image {}: {e}", path.display()))
    })
}

/// Integer pixel rectangle of a chunk within an image of the given size.
fn pixel_rect(chunk: &Chunk, img_w: u32, img_h: u32) -> (u32, u32, u32, u32) {
    let x0 = (chunk.bbox.x0.round().max(0.0) as u32).min(img_w.saturating_sub(1));
    let y0 = (chunk.bbox.y0.round().max(0.0) as u32).min(img_h.saturating_sub(1));
    let x1 = (chunk.bbox.x1.round() as u32).clamp(x0 + 1, img_w.max(x0 + 1));
    let y1 = (chunk.bbox.y1.round() as u32).clamp(y0 + 1, img_h.max(y0 + 1));
    (x0, y0, x1 - x0, y1 - y0)
}

/// Render one chunk crop to PNG bytes.
pub fn render_crop(page_image: &DynamicImage, chunk: &Chunk) -> Result<Vec<u8>> {
    let (x, y, w, h) = pixel_rect(chunk, page_image.width(), page_image.height());
    let cropped = page_image.crop_imm(x, y, w, h);
    let mut bytes = Cursor::new(Vec::new());
    cropped
        .write_to(&mut bytes, ImageFormat::Png)
        .map_err(|e| Error::InvalidInput(format!("PNG encoding failed: {e}")))?;
    Ok(bytes.into_inner())
}

/// Render and write every chunk of a page into `out_dir`.
pub fn render_crops_to_dir(
    page_image: &DynamicImage,
    chunks: &[Chunk],
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    for chunk in chunks {
        let bytes = render_crop(page_image, chunk)?;
        std::fs::write(out_dir.join(chunk.crop_file_name()), bytes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::layout::BoxCategory;
    use image::{Rgb, RgbImage};

    fn chunk(x0: f64, y0: f64, x1: f64, y1: f64) -> Chunk {
        Chunk {
            chunk_id: "p__0".into(),
            page_id: "p".into(),
            bbox: BBox::new(x0, y0, x1, y1).unwrap(),
            category: BoxCategory::SemanticBox,
            order_index: 0,
            confidence: 1.0,
        }
    }

    #[test]
    fn crop_matches_region_and_color() {
        let mut img = RgbImage::from_pixel(100, 100, Rgb([255, 255, 255]));
        for y in 10..40 {
            for x in 20..60 {
                img.put_pixel(x, y, Rgb([10, 200, 30]));
            }
        }
        let page = DynamicImage::ImageRgb8(img);
        let bytes = render_crop(&page, &chunk(20.0, 10.0, 60.0, 40.0)).unwrap();
        let decoded = image::load_from_memory(&bytes).unwrap().to_rgb8();
        assert_eq!(decoded.dimensions(), (40, 30));
        assert_eq!(decoded.get_pixel(2, 2), &Rgb([10, 200, 30]));
    }

    #[test]
    fn crop_file_naming() {
        let mut c = chunk(0.0, 0.0, 10.0, 10.0);
        c.page_id = "page-7".into();
        c.order_index = 3;
        c.chunk_id = "page-7__3".into();
        assert_eq!(c.crop_file_name(), "page-7__3.png");
    }
}
