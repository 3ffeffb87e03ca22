//! Binary PPM rendering of scalar grids.

use nalgebra::DMatrix;

/// Colour of non-finite (masked) cells.
pub const MISSING_COLOR: [u8; 3] = [255, 0, 255];

/// Linear gray level of `v` between `min` (black) and `max` (white).
pub fn gray_level(v: f64, min: f64, max: f64) -> u8 {
    if !(max > min) {
        return 0;
    }
    ((v - min) / (max - min) * 255.0).round().clamp(0.0, 255.0) as u8
}

/// `P6` image with one pixel per cell; row 0 at the top.
pub fn render(grid: &DMatrix<f64>) -> Vec<u8> {
    let (h, w) = grid.shape();
    let finite = grid.iter().cloned().filter(|v| v.is_finite());
    let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * w * h);
    for i in 0..h {
        for j in 0..w {
            let v = grid[(i, j)];
            if v.is_finite() {
                let g = gray_level(v, min, max);
                out.extend_from_slice(&[g, g, g]);
            } else {
                out.extend_from_slice(&MISSING_COLOR);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixels(img: &[u8]) -> &[u8] {
        let mut newlines = 0;
        let start = img
            .iter()
            .position(|&b| {
                if b == b'\n' {
                    newlines += 1;
                }
                newlines == 3
            })
            .unwrap();
        &img[start + 1..]
    }

    #[test]
    fn single_zero_cell_is_black() {
        let img = render(&DMatrix::from_element(1, 1, 0.0));
        assert!(img.starts_with(b"P6\n1 1\n255\n"));
        assert_eq!(pixels(&img), &[0, 0, 0]);
    }

    #[test]
    fn checkerboard() {
        let img = render(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(pixels(&img), &[0, 0, 0, 255, 255, 255, 255, 255, 255, 0, 0, 0]);
    }

    #[test]
    fn missing_cells_are_magenta() {
        let img = render(&DMatrix::from_row_slice(1, 3, &[f64::NAN, 2.0, 4.0]));
        assert_eq!(pixels(&img), &[255, 0, 255, 0, 0, 0, 255, 255, 255]);
        let all_nan = render(&DMatrix::from_element(1, 2, f64::NAN));
        assert_eq!(pixels(&all_nan), &[255, 0, 255, 255, 0, 255]);
    }

    #[test]
    fn wide_grid_header_order() {
        let img = render(&DMatrix::from_element(2, 5, 1.0));
        assert!(img.starts_with(b"P6\n5 2\n255\n"));
        assert!(pixels(&img).iter().all(|&b| b == 0));
    }
}
