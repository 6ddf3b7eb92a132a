//! Q-Q scatter plots as standalone SVG.

use std::fmt::Write;

use crate::error::{invalid, Result};

/// Canvas side in pixels.
pub const SIZE: f64 = 480.0;
/// Plot area inset from each edge.
pub const MARGIN: f64 = 48.0;

/// Render `(empirical, theoretical)` pairs with theoretical quantiles on the
/// horizontal axis, empirical on the vertical, and the line `y = x`.
///
/// Both axes share one range, so points on the identity line are drawn on
/// the reference line.
pub fn emit_svg_qq(pairs: &[(f64, f64)], title: &str) -> Result<String> {
    if pairs.len() < 2 {
        return Err(invalid(
            "Q-Q pairs",
            format!("need at least 2, got {}", pairs.len()),
        ));
    }
    if pairs.iter().any(|&(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(invalid("Q-Q pairs", "values must be finite"));
    }
    let (mut lo, mut hi) = pairs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(a, b)| {
            (lo.min(a).min(b), hi.max(a).max(b))
        });
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let span = SIZE - 2.0 * MARGIN;
    let px = |v: f64| MARGIN + (v - lo) / (hi - lo) * span;
    let py = |v: f64| SIZE - MARGIN - (v - lo) / (hi - lo) * span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">theoretical</text>"#,
        SIZE / 2.0,
        SIZE - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">empirical</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    for (v, anchor) in [(lo, "start"), (hi, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" font-size="10" text-anchor="{anchor}">{}</text>"#,
            px(v),
            SIZE - MARGIN + 14.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<line class="identity" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="red"/>"#,
        px(lo),
        py(lo),
        px(hi),
        py(hi)
    );
    let _ = writeln!(s, r#"<g fill="black">"#);
    for &(emp, theo) in pairs {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="1.5"/>"#,
            px(theo),
            py(emp)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

fn fmt_tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
