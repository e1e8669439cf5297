//! CSV tables, the run manifest and static SVG plots.

use std::path::Path;

use serde::Serialize;

use crate::error::CliResult;

/// Shortest round-trip formatting, so equal values give equal bytes.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| crate::error::CliError::Solver(arnold_stab_core::Error::Io(e.into_error())))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Table> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.map(|r| r.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect())
    }
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub config: &'a std::collections::BTreeMap<String, String>,
    pub versions: Versions,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub status: String,
}

#[derive(Serialize)]
pub struct Versions {
    pub arnold_stab: &'static str,
    pub manifest_format: u32,
}

impl Versions {
    pub fn current() -> Versions {
        Versions { arnold_stab: env!("CARGO_PKG_VERSION"), manifest_format: 1 }
    }
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> CliResult<()> {
    let text = serde_json::to_string_pretty(m).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

/// One named curve of a plot.
pub struct Curve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static line (or scatter) plot on linear axes.
pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, curves: &[Curve], scatter: bool) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 400.0, 70.0, 20.0, 40.0, 50.0);
    let pts = curves.iter().flat_map(|c| c.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
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
    if y1 - y0 <= 1e-300 {
        let pad = if y0 == 0.0 { 1.0 } else { y0.abs() * 0.1 };
        y0 -= pad;
        y1 += pad;
    }
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n\
         <line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        w / 2.0,
        esc(title),
        h - mb,
        w - mr,
        h - mb,
        h - mb
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        s += &format!(
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{:.3e}</text>\n<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{:.3e}</text>\n",
            sx(fx),
            h - mb + 16.0,
            fx,
            ml - 4.0,
            sy(fy) + 4.0,
            fy
        );
    }
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", w / 2.0, h - 12.0, esc(xlabel));
    s += &format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        h / 2.0,
        h / 2.0,
        esc(ylabel)
    );
    for (i, c) in curves.iter().enumerate() {
        let col = COLOURS[i % COLOURS.len()];
        let good: Vec<_> = c.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
        if scatter {
            for (x, y) in &good {
                s += &format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{col}\"/>\n", sx(*x), sy(*y));
            }
        } else {
            let path: Vec<String> = good.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            s += &format!("<polyline fill=\"none\" stroke=\"{col}\" stroke-width=\"1.5\" points=\"{}\"/>\n", path.join(" "));
        }
        s += &format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{col}\">{}</text>\n",
            ml + 10.0,
            mt + 14.0 * (i as f64 + 1.0),
            esc(&c.name)
        );
    }
    s + "</svg>\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip_and_plot() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["x", "y"]);
        t.push(vec![fmt(0.1), fmt(-2.5e-9)]);
        t.push(vec![fmt(1.0), fmt(f64::NAN)]);
        let p = dir.path().join("t.csv");
        t.write(&p).unwrap();
        let back = Table::read(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("y").unwrap()[0], -2.5e-9);
        let svg = svg_plot("t", "x", "y", &[Curve { name: "y".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] }], false);
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }
}
