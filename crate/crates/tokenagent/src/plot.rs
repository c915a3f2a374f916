//! Minimal PNG line charts for metrics.csv — no plotting stack, just the
//! `image` crate and Bresenham lines. Good enough to eyeball a learning
//! curve.

use image::{Rgb, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("column {0:?} not found")]
    UnknownColumn(String),
    #[error("nothing to plot")]
    Empty,
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

/// One named series of (x, y) points.
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Pull `columns` out of a metrics CSV, keyed by the `update` column.
pub fn series_from_csv(csv: &str, columns: &[&str]) -> Result<Vec<Series>, PlotError> {
    let mut lines = csv.lines().enumerate();
    let (_, header) = lines.next().ok_or(PlotError::Empty)?;
    let fields: Vec<&str> = header.split(',').collect();
    let x_idx = fields
        .iter()
        .position(|f| *f == "update")
        .ok_or_else(|| PlotError::UnknownColumn("update".into()))?;
    let mut idxs = Vec::with_capacity(columns.len());
    for c in columns {
        idxs.push(
            fields
                .iter()
                .position(|f| f == c)
                .ok_or_else(|| PlotError::UnknownColumn((*c).into()))?,
        );
    }
    let mut series: Vec<Series> = columns
        .iter()
        .map(|c| Series {
            name: (*c).to_string(),
            points: Vec::new(),
        })
        .collect();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> Result<Option<f64>, PlotError> {
            let cell = cells.get(i).copied().unwrap_or("");
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>().map(Some).map_err(|e| PlotError::Csv {
                line: lineno + 1,
                msg: e.to_string(),
            })
        };
        let x = parse(x_idx)?.ok_or(PlotError::Csv {
            line: lineno + 1,
            msg: "missing update value".into(),
        })?;
        for (s, &i) in series.iter_mut().zip(&idxs) {
            if let Some(y) = parse(i)? {
                s.points.push((x, y));
            }
        }
    }
    Ok(series)
}

const PALETTE: [Rgb<u8>; 6] = [
    Rgb([31, 119, 180]),
    Rgb([255, 127, 14]),
    Rgb([44, 160, 44]),
    Rgb([214, 39, 40]),
    Rgb([148, 103, 189]),
    Rgb([140, 86, 75]),
];

fn draw_line(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Render the series to an RGB image with axes and a per-series color.
pub fn render(series: &[Series], width: u32, height: u32) -> Result<RgbImage, PlotError> {
    let points: usize = series.iter().map(|s| s.points.len()).sum();
    if points == 0 {
        return Err(PlotError::Empty);
    }
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }

    let margin = 24_i64;
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let (w, h) = (width as i64, height as i64);
    let px = |x: f64| margin + ((x - x_min) / (x_max - x_min) * (w - 2 * margin) as f64) as i64;
    let py = |y: f64| {
        h - margin - ((y - y_min) / (y_max - y_min) * (h - 2 * margin) as f64) as i64
    };

    let axis = Rgb([120, 120, 120]);
    draw_line(&mut img, margin, margin, margin, h - margin, axis);
    draw_line(&mut img, margin, h - margin, w - margin, h - margin, axis);
    // zero line when the y-range straddles it
    if y_min < 0.0 && y_max > 0.0 {
        draw_line(&mut img, margin, py(0.0), w - margin, py(0.0), Rgb([210, 210, 210]));
    }

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        for pair in s.points.windows(2) {
            let [(x0, y0), (x1, y1)] = [pair[0], pair[1]];
            draw_line(&mut img, px(x0), py(y0), px(x1), py(y1), color);
        }
        // legend swatch in the top-left corner
        let ly = margin / 2 + 6 * si as i64;
        draw_line(&mut img, margin, ly, margin + 14, ly, color);
    }
    Ok(img)
}

/// Plot selected metrics columns from a CSV string straight to a PNG file.
pub fn plot_csv(
    csv: &str,
    columns: &[&str],
    path: &std::path::Path,
    width: u32,
    height: u32,
) -> Result<(), PlotError> {
    let series = series_from_csv(csv, columns)?;
    let img = render(&series, width, height)?;
    img.save(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "update,mean_reward,eval_em,critic_loss\n0,-1.0,0.0,0.5\n1,-0.5,0.25,\n2,0.5,1.0,0.1\n";

    #[test]
    fn parses_selected_columns() {
        let s = series_from_csv(CSV, &["mean_reward", "eval_em"]).unwrap();
        assert_eq!(s[0].points, vec![(0.0, -1.0), (1.0, -0.5), (2.0, 0.5)]);
        assert_eq!(s[1].points.len(), 3);
    }

    #[test]
    fn empty_cells_are_skipped() {
        let s = series_from_csv(CSV, &["critic_loss"]).unwrap();
        assert_eq!(s[0].points, vec![(0.0, 0.5), (2.0, 0.1)]);
    }

    #[test]
    fn unknown_column_is_an_error() {
        assert!(matches!(
            series_from_csv(CSV, &["nope"]),
            Err(PlotError::UnknownColumn(_))
        ));
    }

    #[test]
    fn render_smoke() {
        let s = series_from_csv(CSV, &["mean_reward"]).unwrap();
        let img = render(&s, 200, 120).unwrap();
        assert_eq!((img.width(), img.height()), (200, 120));
        // something non-white got drawn
        assert!(img.pixels().any(|p| *p != Rgb([255, 255, 255])));
    }

    #[test]
    fn plot_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.png");
        plot_csv(CSV, &["mean_reward", "eval_em"], &path, 320, 200).unwrap();
        assert!(path.exists());
    }
}
