use super::GrayImage;

/// Rasterizes a segment with Bresenham's algorithm, clipping to the image.
pub fn draw_line(img: &mut GrayImage, from: (f64, f64), to: (f64, f64), value: f32) {
    if !(from.0.is_finite() && from.1.is_finite() && to.0.is_finite() && to.1.is_finite()) {
        return;
    }
    let (mut x0, mut y0) = (from.0.round() as i64, from.1.round() as i64);
    let (x1, y1) = (to.0.round() as i64, to.1.round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (w, h) = (img.width() as i64, img.height() as i64);
    // bounded so a wildly projected quad cannot stall annotation
    let mut budget = 4 * (w + h) + dx - dy;
    loop {
        if (0..w).contains(&x0) && (0..h).contains(&y0) {
            img.set(x0 as usize, y0 as usize, value);
        }
        if (x0 == x1 && y0 == y1) || budget <= 0 {
            break;
        }
        budget -= 1;
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Draws the closed polygon through the four corners.
pub fn draw_quad(img: &mut GrayImage, quad: &[(f64, f64); 4], value: f32) {
    for i in 0..4 {
        draw_line(img, quad[i], quad[(i + 1) % 4], value);
    }
}
