//! CSV tables and the static SVG plot of CRB versus transmit power.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const RESULT_COLUMNS: [&str; 11] = [
    "scheme",
    "pattern",
    "seed",
    "power_dbm",
    "crb_total_rad2",
    "crb_per_target",
    "power_gain",
    "geometric_gain",
    "iterations",
    "wallclock_s",
    "config_hash",
];

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: String,
    pub pattern: String,
    pub seed: u64,
    pub power_dbm: f64,
    /// `inf` for unidentifiable layouts.
    pub crb_total: f64,
    pub crb_per_target: Vec<f64>,
    pub power_gain: Vec<f64>,
    pub geometric_gain: Vec<f64>,
    pub iterations: usize,
    pub wallclock_s: Option<f64>,
    pub config_hash: String,
}

/// Shortest text that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";")
}

impl ResultRow {
    fn fields(&self) -> [String; 11] {
        [
            self.scheme.clone(),
            self.pattern.clone(),
            self.seed.to_string(),
            fmt_f64(self.power_dbm),
            fmt_f64(self.crb_total),
            join(&self.crb_per_target),
            join(&self.power_gain),
            join(&self.geometric_gain),
            self.iterations.to_string(),
            self.wallclock_s.map(fmt_f64).unwrap_or_default(),
            self.config_hash.clone(),
        ]
    }
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        return Err(parse_err(path, 1, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad number '{}' in {}", &rec[k], RESULT_COLUMNS[k])))
        };
        let list = |k: usize| -> Result<Vec<f64>> {
            if rec[k].is_empty() {
                return Ok(Vec::new());
            }
            rec[k]
                .split(';')
                .map(|v| {
                    v.parse()
                        .map_err(|_| parse_err(path, line, format!("bad number '{v}' in {}", RESULT_COLUMNS[k])))
                })
                .collect()
        };
        rows.push(ResultRow {
            scheme: rec[0].to_string(),
            pattern: rec[1].to_string(),
            seed: rec[2].parse().map_err(|_| parse_err(path, line, "bad seed".into()))?,
            power_dbm: num(3)?,
            crb_total: num(4)?,
            crb_per_target: list(5)?,
            power_gain: list(6)?,
            geometric_gain: list(7)?,
            iterations: rec[8]
                .parse()
                .map_err(|_| parse_err(path, line, "bad iteration count".into()))?,
            wallclock_s: if rec[9].is_empty() { None } else { Some(num(9)?) },
            config_hash: rec[10].to_string(),
        });
    }
    Ok(rows)
}

/// Median and range of the finite values at one power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub power_dbm: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// Per `(pattern, scheme)` statistics across seeds, powers ascending.
/// Powers where every seed is unidentifiable are left out.
pub fn summarize(rows: &[ResultRow]) -> BTreeMap<(String, String), Vec<SeriesPoint>> {
    let mut groups: BTreeMap<(String, String), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.pattern.clone(), r.scheme.clone()))
            .or_default()
            .entry(r.power_dbm.to_bits())
            .or_default()
            .push(r.crb_total);
    }
    groups
        .into_iter()
        .map(|(key, by_power)| {
            let mut pts: Vec<SeriesPoint> = by_power
                .into_iter()
                .filter_map(|(bits, mut v)| {
                    v.retain(|x| x.is_finite());
                    if v.is_empty() {
                        return None;
                    }
                    v.sort_by(f64::total_cmp);
                    let m = v.len() / 2;
                    let median = if v.len() % 2 == 1 {
                        v[m]
                    } else {
                        0.5 * (v[m - 1] + v[m])
                    };
                    Some(SeriesPoint {
                        power_dbm: f64::from_bits(bits),
                        median,
                        min: v[0],
                        max: v[v.len() - 1],
                    })
                })
                .collect();
            pts.sort_by(|a, b| a.power_dbm.total_cmp(&b.power_dbm));
            (key, pts)
        })
        .collect()
}

fn colour(scheme: &str) -> &'static str {
    match scheme {
        "6dma" => "#1f77b4",
        "fa-ma" => "#2ca02c",
        "fpa" => "#d62728",
        _ => "#7f7f7f",
    }
}

/// Log-scale CRB versus power: one median polyline per (pattern, scheme)
/// with a shaded min–max band across seeds. Isotropic curves are dashed.
pub fn render_plot(rows: &[ResultRow]) -> String {
    let (w, h) = (760.0, 480.0);
    let (left, right, top, bottom) = (80.0, 200.0, 40.0, 60.0);
    let series = summarize(rows);
    let all: Vec<&SeriesPoint> = series.values().flatten().collect();

    let (mut x0, mut x1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.power_dbm), b.max(p.power_dbm))
    });
    let (mut y0, mut y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.min.log10()), b.max(p.max.log10()))
    });
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    y0 = y0.floor();
    y1 = y1.ceil();
    if y1 - y0 < 1.0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| top + (y1 - y) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let hash = rows.first().map_or("", |r| r.config_hash.as_str());
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, "<!-- config_hash {hash} -->").unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">CRB versus transmit power</text>"#,
        (left + w - right) / 2.0
    )
    .unwrap();

    // axes and grid
    let (ax0, ax1, ay0, ay1) = (px(x0), px(x1), py(y0), py(y1));
    writeln!(
        s,
        r#"<rect x="{ax0:.2}" y="{ay1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        ax1 - ax0,
        ay0 - ay1
    )
    .unwrap();
    let mut powers: Vec<f64> = all.iter().map(|p| p.power_dbm).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    for p in &powers {
        let x = px(*p);
        writeln!(s, r##"<line x1="{x:.2}" y1="{ay0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{p}</text>"##, ay0 + 5.0, ay0 + 20.0).unwrap();
    }
    let mut d = y0 as i64;
    while d as f64 <= y1 {
        let y = py(d as f64);
        writeln!(s, r##"<line x1="{ax0:.2}" y1="{y:.2}" x2="{ax1:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##, ax0 - 6.0, y + 4.0).unwrap();
        d += 1;
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">transmit power (dBm)</text>"#,
        (ax0 + ax1) / 2.0,
        h - 18.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">total CRB (rad²)</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0
    )
    .unwrap();

    // series
    let mut legend_y = top + 10.0;
    let keys: BTreeMap<(String, String), ()> = rows
        .iter()
        .map(|r| ((r.pattern.clone(), r.scheme.clone()), ()))
        .collect();
    for (pattern, scheme) in keys.keys() {
        let c = colour(scheme);
        let dash = if pattern == "isotropic" {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let pts = series
            .get(&(pattern.clone(), scheme.clone()))
            .map_or(&[][..], |v| v.as_slice());
        if pts.len() > 1 {
            let upper: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(p.power_dbm), py(p.max.log10())))
                .collect();
            let lower: Vec<String> = pts
                .iter()
                .rev()
                .map(|p| format!("{:.2},{:.2}", px(p.power_dbm), py(p.min.log10())))
                .collect();
            writeln!(
                s,
                r#"<polygon points="{} {}" fill="{c}" fill-opacity="0.15" stroke="none"/>"#,
                upper.join(" "),
                lower.join(" ")
            )
            .unwrap();
            let line: Vec<String> = pts
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(p.power_dbm), py(p.median.log10())))
                .collect();
            writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"{dash}/>"#,
                line.join(" ")
            )
            .unwrap();
        }
        for p in pts {
            writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{c}"/>"#,
                px(p.power_dbm),
                py(p.median.log10())
            )
            .unwrap();
        }
        let lx = w - right + 15.0;
        let note = if pts.is_empty() { " (unidentifiable)" } else { "" };
        writeln!(s, r#"<line x1="{lx}" y1="{legend_y}" x2="{}" y2="{legend_y}" stroke="{c}" stroke-width="2"{dash}/><text x="{}" y="{}">{scheme} / {pattern}{note}</text>"#, lx + 25.0, lx + 32.0, legend_y + 4.0).unwrap();
        legend_y += 20.0;
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_plot(rows)).map_err(|e| Error::io(path, e))
}
