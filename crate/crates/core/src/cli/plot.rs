//! Static four-panel SVG of a trace: trajectory against the reference
//! line, cross-track error, rotation rate with the step-out limit, and the
//! integral state. Output depends only on the trace and options.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::sim::TraceRecord;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 720.0;
const MAX_BUCKETS: usize = 1200;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlotOptions {
    /// Step-out limit in rad/s; inferred from saturated rows when absent.
    pub omega_so: Option<f64>,
}

/// Reference direction recovered from `p = z·ê + ε·ê⊥` at the row farthest
/// from the origin. Zero for a trace that never leaves it.
pub fn infer_theta_r(trace: &[TraceRecord]) -> f64 {
    let Some(r) = trace
        .iter()
        .max_by(|a, b| a.p_x.hypot(a.p_z).total_cmp(&b.p_x.hypot(b.p_z)))
    else {
        return 0.0;
    };
    let n2 = r.z * r.z + r.eps * r.eps;
    if n2 == 0.0 {
        return 0.0;
    }
    let cos = (r.z * r.p_x + r.eps * r.p_z) / n2;
    let sin = (r.z * r.p_z - r.eps * r.p_x) / n2;
    sin.atan2(cos)
}

/// Largest commanded rate among saturated rows.
pub fn infer_omega_so(trace: &[TraceRecord]) -> Option<f64> {
    trace
        .iter()
        .filter(|r| r.saturated)
        .map(|r| r.u_mag)
        .reduce(f64::max)
}

struct Series {
    points: Vec<(f64, f64)>,
    color: &'static str,
    dashed: bool,
}

struct Panel {
    title: &'static str,
    x_label: &'static str,
    y_label: &'static str,
    series: Vec<Series>,
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

/// Keeps the first, min and max point of each bucket so that extremes and
/// flat segments survive.
fn decimate(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= 3 * MAX_BUCKETS {
        return points.to_vec();
    }
    let size = points.len().div_ceil(MAX_BUCKETS);
    let mut out = Vec::with_capacity(3 * MAX_BUCKETS + 1);
    for chunk in points.chunks(size) {
        let mut idx = vec![0];
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in chunk.iter().enumerate() {
            if p.1 < chunk[lo].1 {
                lo = i;
            }
            if p.1 > chunk[hi].1 {
                hi = i;
            }
        }
        idx.extend([lo, hi]);
        idx.sort_unstable();
        idx.dedup();
        out.extend(idx.into_iter().map(|i| chunk[i]));
    }
    out.push(*points.last().unwrap());
    out
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn draw_panel(out: &mut String, panel: &Panel, x0: f64, y0: f64, w: f64, h: f64) {
    let (left, right, top, bottom) = (x0 + 70.0, x0 + w - 20.0, y0 + 30.0, y0 + h - 45.0);
    let all = || panel.series.iter().flat_map(|s| s.points.iter());
    let (xmin, xmax) = padded_range(all().map(|p| p.0));
    let (ymin, ymax) = padded_range(all().map(|p| p.1));
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * (right - left);
    let sy = |y: f64| bottom - (y - ymin) / (ymax - ymin) * (bottom - top);

    let _ = writeln!(
        out,
        r##"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        y0 + 20.0,
        panel.title
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
        (left + right) / 2.0,
        y0 + h - 8.0,
        panel.x_label
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        x0 + 14.0,
        (top + bottom) / 2.0,
        x0 + 14.0,
        (top + bottom) / 2.0,
        panel.y_label
    );
    for (x, y, anchor, text) in [
        (left, bottom + 16.0, "start", tick(xmin)),
        (right, bottom + 16.0, "end", tick(xmax)),
        (left - 4.0, bottom, "end", tick(ymin)),
        (left - 4.0, top + 10.0, "end", tick(ymax)),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="10">{text}</text>"#
        );
    }
    for s in &panel.series {
        let mut pts = String::new();
        for (x, y) in decimate(&s.points) {
            let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.2"{dash}/>"#,
            pts.trim_end(),
            s.color
        );
    }
}

pub fn render_svg(trace: &[TraceRecord], opts: &PlotOptions) -> String {
    let mm = 1e3;
    let theta = infer_theta_r(trace);
    let (zmin, zmax) = trace
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), r| (lo.min(r.z), hi.max(r.z)));
    let reference = vec![
        (zmin * theta.cos() * mm, zmin * theta.sin() * mm),
        (zmax * theta.cos() * mm, zmax * theta.sin() * mm),
    ];
    let t_span = (
        trace.first().map_or(0.0, |r| r.t),
        trace.last().map_or(0.0, |r| r.t),
    );

    let mut control = vec![Series {
        points: trace.iter().map(|r| (r.t, r.u_mag / TAU)).collect(),
        color: "#1f77b4",
        dashed: false,
    }];
    if let Some(limit) = opts.omega_so.or_else(|| infer_omega_so(trace)) {
        control.push(Series {
            points: vec![(t_span.0, limit / TAU), (t_span.1, limit / TAU)],
            color: "#d62728",
            dashed: true,
        });
    }

    let panels = [
        Panel {
            title: "Trajectory and reference line",
            x_label: "p_x [mm]",
            y_label: "p_z [mm]",
            series: vec![
                Series {
                    points: reference,
                    color: "#888888",
                    dashed: true,
                },
                Series {
                    points: trace.iter().map(|r| (r.p_x * mm, r.p_z * mm)).collect(),
                    color: "#1f77b4",
                    dashed: false,
                },
            ],
        },
        Panel {
            title: "Cross-track error",
            x_label: "t [s]",
            y_label: "eps [mm]",
            series: vec![Series {
                points: trace.iter().map(|r| (r.t, r.eps * mm)).collect(),
                color: "#1f77b4",
                dashed: false,
            }],
        },
        Panel {
            title: "Rotation rate |u| (dashed: step-out limit)",
            x_label: "t [s]",
            y_label: "|u| [Hz]",
            series: control,
        },
        Panel {
            title: "Integral state",
            x_label: "t [s]",
            y_label: "s [-]",
            series: vec![Series {
                points: trace.iter().map(|r| (r.t, r.s)).collect(),
                color: "#2ca02c",
                dashed: false,
            }],
        },
    ];

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (pw, ph) = (WIDTH / 2.0, HEIGHT / 2.0);
    for (i, panel) in panels.iter().enumerate() {
        draw_panel(
            &mut out,
            panel,
            (i % 2) as f64 * pw,
            (i / 2) as f64 * ph,
            pw,
            ph,
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, theta: f64, saturated: bool) -> TraceRecord {
        let (z, eps) = (t * 1e-3, -0.01 + t * 1e-4);
        TraceRecord {
            t,
            p_x: z * theta.cos() - eps * theta.sin(),
            p_z: z * theta.sin() + eps * theta.cos(),
            eps,
            z,
            s: 0.0,
            u_x: 0.0,
            u_z: 0.0,
            u_mag: if saturated { 17.5 } else { 3.0 },
            v_x: 0.0,
            v_z: 0.0,
            saturated,
        }
    }

    #[test]
    fn recovers_reference_angle() {
        let trace: Vec<_> = (0..10).map(|i| rec(i as f64, 0.7, false)).collect();
        assert!((infer_theta_r(&trace) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn limit_line_from_saturated_rows() {
        let trace: Vec<_> = (0..10).map(|i| rec(i as f64, 0.0, i < 5)).collect();
        assert_eq!(infer_omega_so(&trace), Some(17.5));
        let svg = render_svg(&trace, &PlotOptions::default());
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("<polyline").count(), 6);
    }

    #[test]
    fn decimation_keeps_extremes() {
        let pts: Vec<_> = (0..100_000)
            .map(|i| (i as f64, ((i * 7919) % 1000) as f64))
            .collect();
        let d = decimate(&pts);
        assert!(d.len() <= 3 * MAX_BUCKETS + 1);
        assert_eq!(d.iter().map(|p| p.1).fold(f64::MIN, f64::max), 999.0);
        assert_eq!(d.last(), pts.last());
    }

    #[test]
    fn still_trace_renders_flat() {
        let trace = vec![rec(0.0, 0.0, false); 3];
        let svg = render_svg(&trace, &PlotOptions::default());
        assert!(svg.starts_with("<svg"));
        assert!(!svg.contains("NaN"));
    }
}
