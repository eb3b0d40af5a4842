use image::RgbImage;

use super::bbox::BBox;
use crate::error::{Error, Result};

/// Resamples the region `crop` of `image` to `p × p` RGB with bilinear
/// interpolation and returns it row-major, channel-interleaved, scaled to
/// `[0, 1]`; length `3 p²`.
///
/// Sample `(i, j)` is taken at the center of output cell `(i, j)` mapped
/// into the crop. Pixel `(x, y)` covers `[x, x+1) × [y, y+1)`; neighbors
/// outside the image are clamped to the edge.
pub fn extract_crop(image: &RgbImage, crop: &BBox, p: usize) -> Result<Vec<f32>> {
    if p == 0 {
        return Err(Error::invalid("crop resolution must be positive"));
    }
    let (w, h) = (f64::from(image.width()), f64::from(image.height()));
    if w == 0.0 || h == 0.0 {
        return Err(Error::invalid("image is empty"));
    }
    if !crop.is_finite() || !crop.is_ordered() || !crop.within_page(w, h) {
        return Err(Error::invalid(format!(
            "crop {:?} outside the {w}x{h} image",
            <[f64; 4]>::from(*crop)
        )));
    }
    let sx = crop.width() / p as f64;
    let sy = crop.height() / p as f64;
    let max_x = image.width() as i64 - 1;
    let max_y = image.height() as i64 - 1;
    let px = |x: i64, y: i64| image.get_pixel(x.clamp(0, max_x) as u32, y.clamp(0, max_y) as u32).0;

    let mut out = Vec::with_capacity(3 * p * p);
    for j in 0..p {
        let v = crop.y0 + (j as f64 + 0.5) * sy - 0.5;
        let y0 = v.floor();
        let fy = v - y0;
        let y0 = y0 as i64;
        for i in 0..p {
            let u = crop.x0 + (i as f64 + 0.5) * sx - 0.5;
            let x0 = u.floor();
            let fx = u - x0;
            let x0 = x0 as i64;
            let (a, b, c, d) = (px(x0, y0), px(x0 + 1, y0), px(x0, y0 + 1), px(x0 + 1, y0 + 1));
            for ch in 0..3 {
                let top = f64::from(a[ch]) * (1.0 - fx) + f64::from(b[ch]) * fx;
                let bot = f64::from(c[ch]) * (1.0 - fx) + f64::from(d[ch]) * fx;
                out.push(((top * (1.0 - fy) + bot * fy) / 255.0) as f32);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn checkerboard() -> RgbImage {
        RgbImage::from_fn(2, 2, |x, y| if (x + y) % 2 == 0 { Rgb([0, 0, 0]) } else { Rgb([255, 255, 255]) })
    }

    /// Reference bilinear sampler written independently: explicit
    /// coordinate clamping first, then the four-tap weighted average.
    fn oracle(img: &RgbImage, crop: &BBox, p: usize) -> Vec<f64> {
        let mut out = vec![];
        for oy in 0..p {
            for ox in 0..p {
                let cx = crop.x0 + crop.width() * (2 * ox + 1) as f64 / (2 * p) as f64 - 0.5;
                let cy = crop.y0 + crop.height() * (2 * oy + 1) as f64 / (2 * p) as f64 - 0.5;
                let cx = cx.clamp(0.0, (img.width() - 1) as f64);
                let cy = cy.clamp(0.0, (img.height() - 1) as f64);
                let (xl, yl) = (cx.floor() as u32, cy.floor() as u32);
                let (xh, yh) = ((xl + 1).min(img.width() - 1), (yl + 1).min(img.height() - 1));
                let (tx, ty) = (cx - xl as f64, cy - yl as f64);
                for ch in 0..3 {
                    let g = |x: u32, y: u32| img.get_pixel(x, y).0[ch] as f64 / 255.0;
                    out.push(
                        g(xl, yl) * (1.0 - tx) * (1.0 - ty)
                            + g(xh, yl) * tx * (1.0 - ty)
                            + g(xl, yh) * (1.0 - tx) * ty
                            + g(xh, yh) * tx * ty,
                    );
                }
            }
        }
        out
    }

    #[test]
    fn constant_region() {
        let img = RgbImage::from_pixel(10, 10, Rgb([51, 102, 255]));
        let crop = extract_crop(&img, &BBox::new(1.5, 2.0, 7.25, 9.0), 4).unwrap();
        assert_eq!(crop.len(), 48);
        for px in crop.chunks(3) {
            assert!((px[0] - 0.2).abs() < 1e-6 && (px[1] - 0.4).abs() < 1e-6 && (px[2] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn native_size_is_identity() {
        let img = RgbImage::from_fn(8, 6, |x, y| Rgb([(x * 30) as u8, (y * 40) as u8, (x * y) as u8]));
        let crop = extract_crop(&img, &BBox::new(2.0, 1.0, 6.0, 5.0), 4).unwrap();
        let mut expect = vec![];
        for y in 1..5 {
            for x in 2..6 {
                expect.extend(img.get_pixel(x, y).0.iter().map(|&v| v as f32 / 255.0));
            }
        }
        assert_eq!(crop, expect);
    }

    #[test]
    fn checkerboard_upsample() {
        let img = checkerboard();
        let crop = extract_crop(&img, &BBox::new(0.0, 0.0, 2.0, 2.0), 4).unwrap();
        let gray: Vec<f32> = crop.chunks(3).map(|c| c[0]).collect();
        // Hand-computed: sample centers at -0.25, 0.25, 0.75, 1.25 (clamped).
        let expect = [
            0.0, 0.25, 0.75, 1.0, //
            0.25, 0.375, 0.625, 0.75, //
            0.75, 0.625, 0.375, 0.25, //
            1.0, 0.75, 0.25, 0.0,
        ];
        for (g, e) in gray.iter().zip(expect) {
            assert!((g - e).abs() < 1e-6, "{gray:?}");
        }
        let o = oracle(&img, &BBox::new(0.0, 0.0, 2.0, 2.0), 4);
        for (a, b) in crop.iter().zip(&o) {
            assert!((*a as f64 - b).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_oracle_on_fractional_crops() {
        let img = RgbImage::from_fn(13, 9, |x, y| Rgb([(x * 19 % 256) as u8, (y * 27 % 256) as u8, ((x ^ y) * 11 % 256) as u8]));
        for crop in [BBox::new(0.3, 0.7, 12.9, 8.2), BBox::new(4.0, 4.0, 4.0, 6.0), BBox::new(0.0, 0.0, 13.0, 9.0)] {
            for p in [1, 3, 5, 16] {
                let got = extract_crop(&img, &crop, p).unwrap();
                for (a, b) in got.iter().zip(oracle(&img, &crop, p)) {
                    assert!((*a as f64 - b).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn rejects_crops_outside_image() {
        let img = checkerboard();
        assert!(extract_crop(&img, &BBox::new(0.0, 0.0, 3.0, 2.0), 2).is_err());
        assert!(extract_crop(&img, &BBox::new(-1.0, 0.0, 1.0, 2.0), 2).is_err());
        assert!(extract_crop(&img, &BBox::new(0.0, 0.0, 1.0, 1.0), 0).is_err());
    }
}
