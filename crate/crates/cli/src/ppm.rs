//! Binary PPM (P6) writer for the background-image demo.
//!
//! A feature map is rendered by taking channel values as intensities in
//! [0, 1] (clamped), scaled to 0..=255 with round-half-up. Maps with three
//! or more channels use channels 0..3 as RGB; fewer channels replicate
//! channel 0 across RGB. The header is `P6\n<w> <h>\n255\n` followed by
//! `h*w*3` raw bytes, so byte-identical pixels give byte-identical files.

use std::io::Write;

use maskvqa_core::mask_decoder::FeatureMap;

fn to_byte(v: f64) -> u8 {
    let clamped = v.clamp(0.0, 1.0);
    // Round half up: 0.5 * 255 = 127.5 maps to 128.
    (clamped * 255.0 + 0.5) as u8
}

/// Serializes a feature map as a binary PPM image.
pub fn write_ppm(img: &FeatureMap, w: &mut impl Write) -> std::io::Result<()> {
    write!(w, "P6\n{} {}\n255\n", img.w(), img.h())?;
    let mut row = Vec::with_capacity(img.w() * 3);
    for y in 0..img.h() {
        row.clear();
        for x in 0..img.w() {
            let px = img.pixel(y, x);
            if px.len() >= 3 {
                row.extend_from_slice(&[to_byte(px[0]), to_byte(px[1]), to_byte(px[2])]);
            } else {
                let g = to_byte(px[0]);
                row.extend_from_slice(&[g, g, g]);
            }
        }
        w.write_all(&row)?;
    }
    Ok(())
}

/// Writes a feature map to a PPM file.
pub fn save_ppm(img: &FeatureMap, path: impl AsRef<std::path::Path>) -> std::io::Result<()> {
    let mut buf = Vec::new();
    write_ppm(img, &mut buf)?;
    std::fs::write(path, buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_pixel_bytes_are_exact() {
        // 1x2 RGB image: left pixel full red, right pixel mid gray-ish.
        let img = FeatureMap::new(
            1,
            2,
            3,
            vec![1.0, 0.0, 0.0, 0.5, 0.5, 0.5],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_ppm(&img, &mut buf).unwrap();
        assert_eq!(&buf[..11], b"P6\n2 1\n255\n");
        // 0.5 * 255 = 127.5 -> 128 with round-half-up.
        assert_eq!(&buf[11..], &[255, 0, 0, 128, 128, 128]);
    }

    #[test]
    fn single_channel_replicates_to_gray_and_clamps() {
        let img = FeatureMap::new(2, 1, 1, vec![-0.5, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_ppm(&img, &mut buf).unwrap();
        assert_eq!(&buf[..11], b"P6\n1 2\n255\n");
        assert_eq!(&buf[11..], &[0, 0, 0, 255, 255, 255]);
    }
}
