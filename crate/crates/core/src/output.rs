//! Artifact writers: JSON with 17 significant digits, CSV tables and SVG charts.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::evaluation::InsertionReport;

/// `%.17g`-style rendering: 17 significant digits, trailing zeros dropped.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, v);
        trim_fraction(&fixed).to_string()
    } else {
        format!("{}e{}{:02}", trim_fraction(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Four-decimal rendering for human-readable tables.
pub fn format_table_value(v: f64) -> String {
    format!("{v:.4}")
}

struct Precise<'a>(PrettyFormatter<'a>);

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with every float at 17 significant digits, newline terminated.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

pub fn csv_string<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Csv(e.to_string()))?;
    for r in rows {
        w.write_record(r.as_ref()).map_err(|e| Error::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 strings"))
}

const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped horizontal bars: one group per feature, one bar per series.
pub fn bar_chart_svg(title: &str, features: &[String], series: &[(String, Vec<f64>)]) -> String {
    let label_w = 160.0;
    let plot_w = 480.0;
    let bar_h = 14.0;
    let group_h = bar_h * series.len().max(1) as f64 + 10.0;
    let top = 40.0;
    let height = top + group_h * features.len() as f64 + 30.0 + 18.0 * series.len() as f64;
    let width = label_w + plot_w + 40.0;
    let extent = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let has_negative = series.iter().flat_map(|(_, v)| v.iter()).any(|&v| v < 0.0);
    let zero_x = if has_negative { label_w + plot_w / 2.0 } else { label_w };
    let scale = if has_negative { plot_w / 2.0 } else { plot_w } / extent;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    for (f, name) in features.iter().enumerate() {
        let y0 = top + group_h * f as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            label_w - 8.0,
            y0 + group_h / 2.0,
            escape(name)
        );
        for (k, (_, values)) in series.iter().enumerate() {
            let v = values.get(f).copied().unwrap_or(0.0);
            let w = v.abs() * scale;
            let x = if v < 0.0 { zero_x - w } else { zero_x };
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{w:.2}" height="{bar_h}" fill="{}"><title>{:.4}</title></rect>"#,
                y0 + bar_h * k as f64,
                PALETTE[k % PALETTE.len()],
                v
            );
        }
    }
    let axis_bottom = top + group_h * features.len() as f64;
    let _ = writeln!(
        s,
        r#"<line x1="{zero_x}" y1="{top}" x2="{zero_x}" y2="{axis_bottom}" stroke="black"/>"#
    );
    for (k, (label, _)) in series.iter().enumerate() {
        let y = axis_bottom + 20.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{label_w}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{}" y="{:.1}">{}</text>"#,
            y - 10.0,
            PALETTE[k % PALETTE.len()],
            label_w + 18.0,
            y,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Mean AUROC per insertion step, one polyline per report.
pub fn insertion_curves_svg(reports: &[InsertionReport]) -> String {
    let (left, top, w, h) = (60.0, 30.0, 480.0, 300.0);
    let steps = reports
        .iter()
        .filter_map(|r| r.runs.first().map(|c| c.steps.len()))
        .max()
        .unwrap_or(1)
        .max(2);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">"#,
        left + w + 160.0,
        top + h + 50.0
    );
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">Insertion AUROC</text>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    for tick in 0..=4 {
        let v = 0.5 + 0.125 * tick as f64;
        let y = top + h * (1.0 - (v - 0.5) / 0.5);
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end">{v:.2}</text>"#, left - 6.0);
    }
    for k in 1..=steps {
        let x = left + w * (k - 1) as f64 / (steps - 1) as f64;
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{k}</text>"#, top + h + 18.0);
    }
    for (i, report) in reports.iter().enumerate() {
        let n_steps = report.runs.first().map_or(0, |c| c.steps.len());
        let points: Vec<String> = (0..n_steps)
            .map(|k| {
                let mean = report.runs.iter().map(|c| c.steps[k].metrics.auroc).sum::<f64>() / report.runs.len() as f64;
                let x = left + w * k as f64 / (steps - 1) as f64;
                let y = top + h * (1.0 - ((mean - 0.5) / 0.5).clamp(0.0, 1.0));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            left + w + 10.0,
            top + 16.0 * (i + 1) as f64,
            escape(&report.method)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        assert_eq!(format_float(5.0), "5");
        assert_eq!(format_float(0.1), "0.10000000000000001");
        assert_eq!(format_float(-2.5e-7), "-2.4999999999999999e-07");
        assert_eq!(format_float(1.5e-7), "1.4999999999999999e-07");
        assert_eq!(format_float(1e20), "1e+20");
        assert_eq!(format_float(0.0), "0");
        for v in [std::f64::consts::PI, 1.0 / 3.0, -123456.789, 6.02e23, 1e-300, f64::MAX] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn json_uses_precise_floats() {
        let text = to_json_string(&serde_json::json!({"a": [0.1, 2.0], "b": 1})).unwrap();
        assert!(text.contains("0.10000000000000001"), "{text}");
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"][0].as_f64().unwrap(), 0.1);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = bar_chart_svg("t", &["a".into(), "b<".into()], &[("m".into(), vec![1.0, -2.0])]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("b&lt;"));
    }
}
