//! Static SVG 1.1 figures from the CSV artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// A CSV file read as named columns of optional reals.
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    fn read(path: &Path) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.iter().all(String::is_empty) {
            return Err(CliError::Schema(format!("{} is empty", path.display())));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
            let row = rec
                .iter()
                .map(|f| if f.is_empty() { Ok(None) } else { f.trim().parse::<f64>().map(Some) })
                .collect::<Result<Vec<_>, _>>();
            // Non-numeric columns (status, error) are kept as missing.
            let row = match row {
                Ok(r) => r,
                Err(_) => rec.iter().map(|f| f.trim().parse::<f64>().ok()).collect(),
            };
            if row.len() != headers.len() {
                return Err(CliError::Schema(format!("{} row {} has {} fields, header has {}", path.display(), i + 2, row.len(), headers.len())));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CliError::Schema(format!("{} has no data rows", path.display())));
        }
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str, path: &Path) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Schema(format!("{} has no column {name:?} (columns: {})", path.display(), self.headers.join(","))))
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let pad = lo.abs().max(1.0) * 0.05;
            (lo - pad, hi + pad)
        };
        Scale { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

/// About five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, x: &Scale, y: &Scale, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<g class="axes" stroke="black" fill="none"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#);
    for t in ticks(x.lo, x.hi) {
        let px = x.map(t);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 4.0, y0 + 16.0, fmt_tick(t));
    }
    for t in ticks(y.lo, y.hi) {
        let py = y.map(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, x0 - 6.0, py + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

/// One line with a shaded +-1 std band; sorted by x.
struct Series {
    label: String,
    points: Vec<(f64, f64, f64)>,
}

fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (xlo, xhi, ylo, yhi) = all.fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |(a, b, c, d), &(x, y, e)| {
        (a.min(x), b.max(x), c.min(y - e), d.max(y + e))
    });
    let xs = Scale::new(xlo, xhi, LEFT, WIDTH - RIGHT);
    let ys = Scale::new(ylo, yhi, HEIGHT - BOTTOM, TOP);
    let mut s = open(title);
    axes(&mut s, &xs, &ys, xlabel, ylabel);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<g class="series" data-label="{}">"#, escape(&ser.label));
        if ser.points.len() == 1 {
            let (x, y, e) = ser.points[0];
            let (px, top, bot) = (xs.map(x), ys.map(y + e), ys.map(y - e));
            let _ = writeln!(s, r#"<line class="errorbar" x1="{px:.2}" y1="{top:.2}" x2="{px:.2}" y2="{bot:.2}" stroke="{color}"/>"#);
            let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#, ys.map(y));
        } else {
            let mut band = String::new();
            for &(x, y, e) in &ser.points {
                let _ = write!(band, "{:.2},{:.2} ", xs.map(x), ys.map(y + e));
            }
            for &(x, y, e) in ser.points.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", xs.map(x), ys.map(y - e));
            }
            let _ = writeln!(s, r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end());
            let line: Vec<String> = ser.points.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", xs.map(x), ys.map(y))).collect();
            let _ = writeln!(s, r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        }
        let ly = TOP + 14.0 * i as f64 + 6.0;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{}" y="{:.1}">{}</text></g>"#,
            WIDTH - RIGHT - 150.0,
            ly - 9.0,
            WIDTH - RIGHT - 136.0,
            ly,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn series_label(path: &Path) -> String {
    path.parent()
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Mean metric against grid value, one series per aggregate CSV.
pub fn sweep_curve(csvs: &[PathBuf], metric: &str) -> CliResult<String> {
    let mut series = Vec::new();
    for path in csvs {
        let t = Table::read(path)?;
        let (vc, mc, sc) = (t.column("value", path)?, t.column(&format!("{metric}_mean"), path)?, t.column(&format!("{metric}_std"), path)?);
        let mut points: Vec<(f64, f64, f64)> = t
            .rows
            .iter()
            .filter_map(|r| Some((r[vc]?, r[mc]?, r[sc].unwrap_or(0.0))))
            .collect();
        if points.is_empty() {
            return Err(CliError::Schema(format!("{} has no values for {metric}", path.display())));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        series.push(Series { label: series_label(path), points });
    }
    Ok(line_chart(&format!("{metric} across the grid"), "grid value", metric, &series))
}

/// Mean and +-1 std of a metric over epochs, across the given runs.
pub fn variance_timeseries(csvs: &[PathBuf], metric: &str) -> CliResult<String> {
    let mut by_epoch: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for path in csvs {
        let t = Table::read(path)?;
        let (ec, mc) = (t.column("epoch", path)?, t.column(metric, path)?);
        for r in &t.rows {
            if let (Some(e), Some(v)) = (r[ec], r[mc]) {
                by_epoch.entry(e as i64).or_default().push(v);
            }
        }
    }
    if by_epoch.is_empty() {
        return Err(CliError::Schema(format!("no values for {metric}")));
    }
    let points = by_epoch
        .into_iter()
        .map(|(e, vs)| {
            let n = vs.len() as f64;
            let mean = vs.iter().sum::<f64>() / n;
            let std = (vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            (e as f64, mean, std)
        })
        .collect();
    let label = format!("{} run(s)", csvs.len());
    Ok(line_chart(&format!("{metric} during training"), "epoch", metric, &[Series { label, points }]))
}

/// Lattice of `P(y = +1)` values, `p[iy][ix]`.
struct Lattice {
    xs: Vec<f64>,
    ys: Vec<f64>,
    p: Vec<Vec<f64>>,
}

fn lattice(t: &Table, path: &Path) -> CliResult<Lattice> {
    let (xc, yc, pc) = (t.column("x", path)?, t.column("y", path)?, t.column("p", path)?);
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut cells = Vec::with_capacity(t.rows.len());
    for (i, r) in t.rows.iter().enumerate() {
        let (Some(x), Some(y), Some(p)) = (r[xc], r[yc], r[pc]) else {
            return Err(CliError::Schema(format!("{} row {} has a missing value", path.display(), i + 2)));
        };
        cells.push((x, y, p));
        xs.push(x);
        ys.push(y);
    }
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    if xs.len() < 2 || ys.len() < 2 || xs.len() * ys.len() != cells.len() {
        return Err(CliError::Schema(format!(
            "{} is not a complete lattice: {} rows for {} x {} distinct coordinates",
            path.display(),
            cells.len(),
            xs.len(),
            ys.len()
        )));
    }
    let mut p = vec![vec![f64::NAN; xs.len()]; ys.len()];
    for (x, y, v) in cells {
        let ix = xs.binary_search_by(|a| a.total_cmp(&x)).expect("present");
        let iy = ys.binary_search_by(|a| a.total_cmp(&y)).expect("present");
        p[iy][ix] = v;
    }
    if p.iter().flatten().any(|v| v.is_nan()) {
        return Err(CliError::Schema(format!("{} repeats a lattice point", path.display())));
    }
    Ok(Lattice { xs, ys, p })
}

/// Segments of the `level` iso-line, by marching squares with linear
/// interpolation along cell edges.
fn contour(l: &Lattice, level: f64) -> Vec<((f64, f64), (f64, f64))> {
    let mut out = Vec::new();
    let cross = |(xa, ya, va): (f64, f64, f64), (xb, yb, vb): (f64, f64, f64)| {
        let t = (level - va) / (vb - va);
        (xa + t * (xb - xa), ya + t * (yb - ya))
    };
    for iy in 0..l.ys.len() - 1 {
        for ix in 0..l.xs.len() - 1 {
            // Corners counter-clockwise from bottom-left.
            let c = [
                (l.xs[ix], l.ys[iy], l.p[iy][ix]),
                (l.xs[ix + 1], l.ys[iy], l.p[iy][ix + 1]),
                (l.xs[ix + 1], l.ys[iy + 1], l.p[iy + 1][ix + 1]),
                (l.xs[ix], l.ys[iy + 1], l.p[iy + 1][ix]),
            ];
            let mut hits = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if (a.2 >= level) != (b.2 >= level) {
                    hits.push(cross(a, b));
                }
            }
            match hits.len() {
                2 => out.push((hits[0], hits[1])),
                4 => {
                    // Saddle: split by the centre value.
                    let centre = c.iter().map(|v| v.2).sum::<f64>() / 4.0;
                    if (centre >= level) == (c[0].2 >= level) {
                        out.push((hits[0], hits[3]));
                        out.push((hits[1], hits[2]));
                    } else {
                        out.push((hits[0], hits[1]));
                        out.push((hits[2], hits[3]));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

fn heat(p: f64) -> String {
    // Blue at 0, white at 0.5, red at 1.
    let p = p.clamp(0.0, 1.0);
    let (r, g, b) = if p < 0.5 {
        let t = p / 0.5;
        (59.0 + t * 196.0, 76.0 + t * 179.0, 192.0 + t * 63.0)
    } else {
        let t = (p - 0.5) / 0.5;
        (255.0 - t * 75.0, 255.0 - t * 251.0, 255.0 - t * 217.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

pub fn boundary_heatmap(csv: &Path) -> CliResult<String> {
    let t = Table::read(csv)?;
    let l = lattice(&t, csv)?;
    let (nx, ny) = (l.xs.len(), l.ys.len());
    let dx = (l.xs[nx - 1] - l.xs[0]) / (nx - 1) as f64;
    let dy = (l.ys[ny - 1] - l.ys[0]) / (ny - 1) as f64;
    let xs = Scale::new(l.xs[0] - dx / 2.0, l.xs[nx - 1] + dx / 2.0, LEFT, WIDTH - RIGHT);
    let ys = Scale::new(l.ys[0] - dy / 2.0, l.ys[ny - 1] + dy / 2.0, HEIGHT - BOTTOM, TOP);
    let mut s = open("P(y = +1) and the 0.5 decision boundary");
    let (cw, ch) = (xs.map(l.xs[0] + dx / 2.0) - xs.map(l.xs[0] - dx / 2.0), ys.map(l.ys[0] - dy / 2.0) - ys.map(l.ys[0] + dy / 2.0));
    s.push_str("<g class=\"cells\" stroke=\"none\">\n");
    for iy in 0..ny {
        for ix in 0..nx {
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                xs.map(l.xs[ix] - dx / 2.0),
                ys.map(l.ys[iy] + dy / 2.0),
                cw,
                ch,
                heat(l.p[iy][ix])
            );
        }
    }
    s.push_str("</g>\n");
    axes(&mut s, &xs, &ys, "x1", "x2");
    let segments = contour(&l, 0.5);
    let mut d = String::new();
    for ((x0, y0), (x1, y1)) in &segments {
        let _ = write!(d, "M{:.2},{:.2}L{:.2},{:.2}", xs.map(*x0), ys.map(*y0), xs.map(*x1), ys.map(*y1));
    }
    let _ = writeln!(s, r#"<path class="contour" d="{d}" fill="none" stroke="black" stroke-width="2"/>"#);
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(ticks(0.0, 8.0), vec![0.0, 2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn contour_of_a_linear_field_is_straight() {
        // p = x on a 3 x 3 lattice over [0, 1]: the 0.5 line is x = 0.5.
        let xs = vec![0.0, 0.5, 1.0];
        let l = Lattice {
            xs: xs.clone(),
            ys: xs.clone(),
            p: vec![xs.clone(), xs.clone(), xs],
        };
        let segs = contour(&l, 0.5);
        assert!(!segs.is_empty());
        for ((x0, _), (x1, _)) in segs {
            assert!((x0 - 0.5).abs() < 1e-12 && (x1 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_endpoints() {
        assert_eq!(heat(0.5), "#ffffff");
        assert_eq!(heat(0.0), "#3b4cc0");
    }
}
