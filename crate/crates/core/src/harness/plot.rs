//! Minimal self-contained SVG line charts for the aggregate diameters.
//!
//! No plotting dependency pulls its weight here: each chart is a couple of
//! polylines on a log-scale axis, written as a standalone .svg file.

use super::experiment::AggregateRow;
use std::fmt::Write;

const W: f64 = 860.0;
const H: f64 = 520.0;
const ML: f64 = 72.0;
const MR: f64 = 24.0;
const MT: f64 = 46.0;
const MB: f64 = 56.0;

/// Display floor so zero diameters stay on the log axis.
const FLOOR: f64 = 1e-12;

struct Line<'a> {
    name: &'a str,
    values: Vec<f64>,
    color: &'a str,
    dashed: bool,
}

pub(super) fn x0_chart(rows: &[AggregateRow]) -> String {
    chart(
        "Initial-state estimate diameter",
        rows.iter().map(|r| r.k as f64).collect(),
        Some((
            rows.iter().map(|r| r.min_diam_x0).collect(),
            rows.iter().map(|r| r.max_diam_x0).collect(),
            "#1f77b4",
        )),
        vec![
            Line {
                name: "mean",
                values: rows.iter().map(|r| r.mean_diam_x0).collect(),
                color: "#1f77b4",
                dashed: false,
            },
            Line {
                name: "guaranteed bound",
                values: rows.iter().map(|r| r.bound).collect(),
                color: "#d62728",
                dashed: true,
            },
        ],
    )
}

pub(super) fn m_chart(rows: &[AggregateRow]) -> String {
    chart(
        "Landmark estimate diameter",
        rows.iter().map(|r| r.k as f64).collect(),
        Some((
            rows.iter().map(|r| r.min_diam_m).collect(),
            rows.iter().map(|r| r.max_diam_m).collect(),
            "#2ca02c",
        )),
        vec![Line {
            name: "mean",
            values: rows.iter().map(|r| r.mean_diam_m).collect(),
            color: "#2ca02c",
            dashed: false,
        }],
    )
}

fn chart(
    title: &str,
    ks: Vec<f64>,
    band: Option<(Vec<f64>, Vec<f64>, &str)>,
    lines: Vec<Line<'_>>,
) -> String {
    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;
    let kmax = ks.iter().copied().fold(1.0f64, f64::max);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let all = lines
        .iter()
        .flat_map(|l| l.values.iter())
        .chain(band.iter().flat_map(|(a, b, _)| a.iter().chain(b.iter())));
    for &v in all {
        let v = v.max(FLOOR);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        lo = FLOOR;
        hi = 1.0;
    }
    let mut dec_lo = lo.log10().floor() as i32;
    let mut dec_hi = hi.log10().ceil() as i32;
    if dec_hi <= dec_lo {
        dec_hi = dec_lo + 1;
    }
    if dec_hi - dec_lo > 16 {
        dec_lo = dec_hi - 16;
    }

    let sx = |k: f64| ML + k / kmax * plot_w;
    let sy = |v: f64| {
        let d = v.max(FLOOR).log10().clamp(dec_lo as f64, dec_hi as f64);
        MT + (dec_hi as f64 - d) / (dec_hi - dec_lo) as f64 * plot_h
    };

    let mut s = String::with_capacity(16 * 1024);
    let _ = write!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"##
    );
    let _ = write!(s, r##"<rect width="{W}" height="{H}" fill="white"/>"##);
    let _ = write!(
        s,
        r##"<text x="{}" y="26" font-size="16" fill="#222" text-anchor="middle">{title}</text>"##,
        W / 2.0
    );

    for d in dec_lo..=dec_hi {
        let y = sy(10f64.powi(d));
        let _ = write!(
            s,
            r##"<line x1="{ML}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd" stroke-width="1"/>"##,
            W - MR
        );
        let _ = write!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-size="12" fill="#444" text-anchor="end">1e{d}</text>"##,
            ML - 8.0,
            y + 4.0
        );
    }
    let k_step = nice_step(kmax / 6.0);
    let mut k = 0.0;
    while k <= kmax + 1e-9 {
        let x = sx(k);
        let _ = write!(
            s,
            r##"<line x1="{x:.1}" y1="{MT}" x2="{x:.1}" y2="{:.1}" stroke="#eee" stroke-width="1"/>"##,
            H - MB
        );
        let _ = write!(
            s,
            r##"<text x="{x:.1}" y="{:.1}" font-size="12" fill="#444" text-anchor="middle">{k}</text>"##,
            H - MB + 18.0
        );
        k += k_step;
    }
    let _ = write!(
        s,
        r##"<text x="{}" y="{}" font-size="13" fill="#222" text-anchor="middle">step k</text>"##,
        ML + plot_w / 2.0,
        H - 14.0
    );
    let _ = write!(
        s,
        r##"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{0:.1}" stroke="#333" stroke-width="1"/><line x1="{ML}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#333" stroke-width="1"/>"##,
        H - MB,
        W - MR
    );

    if let Some((blo, bhi, color)) = &band {
        let mut pts = String::new();
        for (k, v) in ks.iter().zip(bhi.iter()) {
            let _ = write!(pts, "{:.2},{:.2} ", sx(*k), sy(*v));
        }
        for (k, v) in ks.iter().zip(blo.iter()).rev() {
            let _ = write!(pts, "{:.2},{:.2} ", sx(*k), sy(*v));
        }
        let _ = write!(
            s,
            r##"<polygon points="{}" fill="{color}" opacity="0.15" stroke="none"/>"##,
            pts.trim_end()
        );
    }

    for line in &lines {
        let mut pts = String::new();
        for (k, v) in ks.iter().zip(line.values.iter()) {
            let _ = write!(pts, "{:.2},{:.2} ", sx(*k), sy(*v));
        }
        let dash = if line.dashed {
            r##" stroke-dasharray="7 5""##
        } else {
            ""
        };
        let _ = write!(
            s,
            r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"{dash}/>"##,
            pts.trim_end(),
            line.color
        );
    }

    let mut ly = MT + 14.0;
    for line in &lines {
        let dash = if line.dashed {
            r##" stroke-dasharray="7 5""##
        } else {
            ""
        };
        let _ = write!(
            s,
            r##"<line x1="{0:.1}" y1="{ly:.1}" x2="{1:.1}" y2="{ly:.1}" stroke="{2}" stroke-width="1.8"{dash}/><text x="{3:.1}" y="{4:.1}" font-size="12" fill="#222">{5}</text>"##,
            W - MR - 170.0,
            W - MR - 140.0,
            line.color,
            W - MR - 132.0,
            ly + 4.0,
            line.name
        );
        ly += 18.0;
    }
    if let Some((_, _, color)) = &band {
        let _ = write!(
            s,
            r##"<rect x="{0:.1}" y="{1:.1}" width="30" height="10" fill="{color}" opacity="0.15"/><text x="{2:.1}" y="{3:.1}" font-size="12" fill="#222">min to max</text>"##,
            W - MR - 170.0,
            ly - 5.0,
            W - MR - 132.0,
            ly + 4.0
        );
    }

    s.push_str("</svg>");
    s
}

/// Rounds up to a 1/2/5 decade step.
fn nice_step(raw: f64) -> f64 {
    let raw = raw.max(1e-9);
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let m = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_wellformed_svg() {
        let rows: Vec<AggregateRow> = (0..50)
            .map(|k| AggregateRow {
                k,
                min_diam_x0: 4.0 * 0.9f64.powi(k as i32),
                mean_diam_x0: 4.5 * 0.9f64.powi(k as i32),
                max_diam_x0: 5.0 * 0.9f64.powi(k as i32),
                bound: 6.0 * 0.95f64.powi(k as i32),
                min_diam_m: 1.0,
                mean_diam_m: 1.2,
                max_diam_m: 1.4,
            })
            .collect();
        for svg in [x0_chart(&rows), m_chart(&rows)] {
            assert!(svg.starts_with("<svg"));
            assert!(svg.ends_with("</svg>"));
            assert!(svg.matches("<polyline").count() >= 1);
            assert!(!svg.contains("NaN"));
        }
    }

    #[test]
    fn zero_values_stay_on_the_axis() {
        let rows = vec![AggregateRow {
            k: 0,
            min_diam_x0: 0.0,
            mean_diam_x0: 0.0,
            max_diam_x0: 0.0,
            bound: 1.0,
            min_diam_m: 0.0,
            mean_diam_m: 0.0,
            max_diam_m: 0.0,
        }];
        let svg = x0_chart(&rows);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn step_rounding_is_1_2_5() {
        assert_eq!(nice_step(0.7), 1.0);
        assert_eq!(nice_step(1.4), 2.0);
        assert_eq!(nice_step(3.0), 5.0);
        assert_eq!(nice_step(83.0), 100.0);
    }
}
