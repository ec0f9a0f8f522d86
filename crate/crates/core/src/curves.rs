//! Training-curve CSV log and its SVG rendering.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::train::EpochRecord;

pub const CSV_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

/// Formats like C's `%.6g`: six significant digits, trailing zeros removed,
/// scientific notation outside `1e-4 <= |x| < 1e6`.
pub fn format_g6(x: f64) -> String {
    const PRECISION: i32 = 6;
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn curves_csv(records: &[EpochRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            format_g6(r.train_loss),
            format_g6(r.train_acc),
            format_g6(r.val_loss),
            format_g6(r.val_acc)
        );
    }
    out
}

fn malformed(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::MalformedCurves(format!("line {line}: {msg}"))
}

pub fn parse_curves_csv(text: &str) -> Result<Vec<EpochRecord>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some((i, h)) => return Err(malformed(i + 1, format!("unexpected header {h:?}"))),
        None => return Err(malformed(1, "empty file")),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(malformed(
                i + 1,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        }
        let epoch = fields[0]
            .parse()
            .map_err(|e| malformed(i + 1, format!("epoch: {e}")))?;
        let mut vals = [0.0; 4];
        for (v, f) in vals.iter_mut().zip(&fields[1..]) {
            *v = f
                .parse()
                .map_err(|e| malformed(i + 1, format!("{f:?}: {e}")))?;
        }
        records.push(EpochRecord {
            epoch,
            train_loss: vals[0],
            train_acc: vals[1],
            val_loss: vals[2],
            val_acc: vals[3],
        });
    }
    if records.is_empty() {
        return Err(malformed(2, "no data rows"));
    }
    Ok(records)
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const TRAIN_COLOR: &str = "#ff7f0e";
const VAL_COLOR: &str = "#1f77b4";

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if !lo.is_finite() || !hi.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 0.5 } else { lo.abs() * 0.05 };
            Axis {
                lo: lo - pad,
                hi: hi + pad,
            }
        } else {
            Axis { lo, hi }
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

fn panel(
    out: &mut String,
    x0: f64,
    title: &str,
    y_label: &str,
    records: &[EpochRecord],
    train: impl Fn(&EpochRecord) -> f64,
    val: impl Fn(&EpochRecord) -> f64,
) {
    let xa = Axis::fit(records.iter().map(|r| r.epoch as f64));
    let ya = Axis::fit(records.iter().flat_map(|r| [train(r), val(r)]));
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let left = x0 + MARGIN_L;
    let bottom = MARGIN_T + plot_h;
    let px = |e: f64| left + xa.frac(e) * plot_w;
    let py = |v: f64| bottom - ya.frac(v) * plot_h;

    let _ = writeln!(out, r#"<g class="panel">"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        left + plot_w / 2.0
    );
    let _ = writeln!(
        out,
        r#"<rect x="{left:.2}" y="{MARGIN_T:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    for (v, anchor_y) in [(ya.lo, bottom), (ya.hi, MARGIN_T)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"#,
            left - 6.0,
            anchor_y + 4.0,
            format_g6(v)
        );
    }
    for (v, anchor_x) in [(xa.lo, left), (xa.hi, left + plot_w)] {
        let _ = writeln!(
            out,
            r#"<text x="{anchor_x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
            bottom + 16.0,
            format_g6(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">epoch</text>"#,
        left + plot_w / 2.0,
        bottom + 36.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">{y_label}</text>"#,
        x0 + 16.0,
        MARGIN_T + plot_h / 2.0,
        x0 + 16.0,
        MARGIN_T + plot_h / 2.0
    );
    for (series, f, color, dash) in [
        (
            "train",
            &train as &dyn Fn(&EpochRecord) -> f64,
            TRAIN_COLOR,
            r#" stroke-dasharray="4 3""#,
        ),
        (
            "validation",
            &val as &dyn Fn(&EpochRecord) -> f64,
            VAL_COLOR,
            "",
        ),
    ] {
        let points: Vec<String> = records
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.epoch as f64), py(f(r))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="{series}" fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
            points.join(" ")
        );
    }
    let legend_y = MARGIN_T + 14.0;
    for (i, (name, color, dash)) in [
        ("train", TRAIN_COLOR, r#" stroke-dasharray="4 3""#),
        ("validation", VAL_COLOR, ""),
    ]
    .into_iter()
    .enumerate()
    {
        let y = legend_y + 16.0 * i as f64;
        let lx = left + plot_w - 110.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{name}</text>"#,
            lx + 30.0,
            y + 4.0
        );
    }
    let _ = writeln!(out, "</g>");
}

/// Two side-by-side panels, loss and accuracy against epoch. Training
/// series are dashed, validation series solid; both axes are linear and
/// fitted to the data range.
pub fn render_svg(records: &[EpochRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect width="100%" height="100%" fill="white"/>"#,
        w = 2.0 * PANEL_W,
        h = PANEL_H
    );
    panel(
        &mut out,
        0.0,
        "(a) loss",
        "loss",
        records,
        |r| r.train_loss,
        |r| r.val_loss,
    );
    panel(
        &mut out,
        PANEL_W,
        "(b) accuracy",
        "accuracy",
        records,
        |r| r.train_acc,
        |r| r.val_acc,
    );
    out.push_str("</svg>\n");
    out
}
