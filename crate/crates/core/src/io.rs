//! Series tables and line plots.

use crate::diagnostics::{EnergyReport, CONSTITUENTS};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write;

/// Leading columns of every series table, before the constituents.
pub const LEADING_COLUMNS: [&str; 5] = ["t", "E_total", "D_total", "E_eps", "D_eps"];

/// One table row; columns absent from `values` are written empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesRow {
    pub values: BTreeMap<String, f64>,
}

impl SeriesRow {
    pub fn at(t: f64) -> Self {
        let mut values = BTreeMap::new();
        values.insert("t".to_string(), t);
        Self { values }
    }

    pub fn set(&mut self, column: &str, v: f64) -> Result<()> {
        if !columns().any(|c| c == column) {
            return Err(Error::Domain(format!("unknown series column {column}")));
        }
        self.values.insert(column.to_string(), v);
        Ok(())
    }
}

impl From<&EnergyReport> for SeriesRow {
    fn from(r: &EnergyReport) -> Self {
        let mut values = r.constituents.clone();
        for (k, v) in LEADING_COLUMNS.iter().zip([r.t, r.e_total, r.d_total, r.e_eps, r.d_eps]) {
            values.insert(k.to_string(), v);
        }
        Self { values }
    }
}

/// All columns in their fixed order.
pub fn columns() -> impl Iterator<Item = &'static str> {
    LEADING_COLUMNS.iter().chain(CONSTITUENTS.iter()).copied()
}

pub fn csv_header() -> String {
    columns().collect::<Vec<_>>().join(",")
}

/// Values use the shortest representation that reads back exactly.
pub fn csv_line(row: &SeriesRow) -> String {
    let mut s = String::new();
    for (i, c) in columns().enumerate() {
        if i > 0 {
            s.push(',');
        }
        if let Some(v) = row.values.get(c) {
            write!(s, "{v:e}").expect("write to string");
        }
    }
    s
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut s = csv_header();
    s.push('\n');
    for r in rows {
        s.push_str(&csv_line(r));
        s.push('\n');
    }
    s
}

/// Parses a table written by `series_csv`; empty cells are left out.
pub fn parse_series_csv(text: &str) -> Result<Vec<SeriesRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Io("empty series table".into()))?;
    if header != csv_header() {
        return Err(Error::Io("series table header does not match the column schema".into()));
    }
    let names: Vec<&str> = columns().collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != names.len() {
            return Err(Error::Io(format!("series row {} has {} cells, expected {}", n + 1, cells.len(), names.len())));
        }
        let mut row = SeriesRow::default();
        for (name, cell) in names.iter().zip(cells) {
            if !cell.is_empty() {
                let v = cell.parse::<f64>().map_err(|e| Error::Io(format!("series row {}, column {name}: {e}", n + 1)))?;
                row.values.insert(name.to_string(), v);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG line plot. With `log_y` the vertical axis shows
/// log10 of the values and nonpositive samples are dropped.
pub fn line_plot(title: &str, x_label: &str, series: &[(&str, Vec<(f64, f64)>)], log_y: bool) -> String {
    let (w, h) = (720.0, 440.0);
    let (ml, mr, mt, mb) = (80.0, 170.0, 40.0, 50.0);
    let prepared: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, pts)| {
            let p = pts
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|&(x, y)| (x, if log_y { y.log10() } else { y }))
                .collect();
            (*name, p)
        })
        .collect();
    let all = prepared.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        let pad = if y0 == 0.0 { 1.0 } else { 0.1 * y0.abs() };
        y0 -= pad;
        y1 += pad;
    }
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| mt + (1.0 - (y - y0) / (y1 - y0)) * ph;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, ml + pw / 2.0, escape(title)).unwrap();
    writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    for t in nice_ticks(x0, x1, 6) {
        let x = px(t);
        writeln!(s, r##"<line x1="{x:.2}" y1="{mt}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##, mt + ph).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, mt + ph + 16.0, fmt_tick(t)).unwrap();
    }
    for t in nice_ticks(y0, y1, 6) {
        let y = py(t);
        writeln!(s, r##"<line x1="{ml}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, ml + pw).unwrap();
        let label = if log_y { format!("1e{}", fmt_tick(t)) } else { fmt_tick(t) };
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, ml - 6.0, y + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ml + pw / 2.0, h - 12.0, escape(x_label)).unwrap();
    for (k, (name, pts)) in prepared.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
        }
        let ly = mt + 14.0 + 18.0 * k as f64;
        let lx = ml + pw + 12.0;
        writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64) -> String {
    if t == 0.0 {
        return "0".into();
    }
    let a = t.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{t:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{t:.2e}")
    }
}
