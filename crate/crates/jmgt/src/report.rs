//! Artifact emission: CSV time series (17 significant digits), minimal
//! self-rendered SVG log-log plots, and the run manifest.

use crate::energy::EnergyReport;
use crate::symbol::{DecayFit, RadialNormsRow};
use crate::Result;
use std::io::Write;
use std::path::Path;

/// Deterministic float formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub const TIMESERIES_HEADER: &str =
    "t,E1,E2,scriptE1,scriptE2,lyapunov,wL2,D_cum,R1_vw,R2_vw,M,M0";

pub fn timeseries_csv(reports: &[EnergyReport]) -> String {
    let mut s = String::with_capacity(reports.len() * 220);
    s.push_str(TIMESERIES_HEADER);
    s.push('\n');
    for r in reports {
        let cols = [
            r.t,
            r.e1,
            r.e2,
            r.script_e1,
            r.script_e2,
            r.lyapunov,
            r.w_l2,
            r.dissipation_d_cum,
            r.r1_v_tau_w,
            r.r2_v_tau_w,
            r.m_monitor,
            r.m0_monitor,
        ];
        let mut first = true;
        for c in cols {
            if !first {
                s.push(',');
            }
            s.push_str(&fmt_f64(c));
            first = false;
        }
        s.push('\n');
    }
    s
}

pub const DECAY_HEADER: &str = "t,normU_j0,normU_j1,normW,normV,v_origin";

pub fn decay_csv(rows: &[RadialNormsRow]) -> String {
    let mut s = String::with_capacity(rows.len() * 120);
    s.push_str(DECAY_HEADER);
    s.push('\n');
    for r in rows {
        let cols = [r.t, r.norm_u_j0, r.norm_u_j1, r.norm_w, r.norm_v, r.v_origin];
        let mut first = true;
        for c in cols {
            if !first {
                s.push(',');
            }
            s.push_str(&fmt_f64(c));
            first = false;
        }
        s.push('\n');
    }
    s
}

pub const FITS_HEADER: &str = "series,t_lo,t_hi,slope,r2";

pub fn fits_csv(fits: &[DecayFit]) -> String {
    let mut s = String::new();
    s.push_str(FITS_HEADER);
    s.push('\n');
    for f in fits {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            f.series_id,
            fmt_f64(f.t_lo),
            fmt_f64(f.t_hi),
            fmt_f64(f.slope),
            fmt_f64(f.r2)
        ));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// One named series for the SVG plot.
pub struct PlotSeries<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal log-log polyline plot with decade tick marks.
pub fn svg_loglog(title: &str, series: &[PlotSeries]) -> String {
    let w = 640.0;
    let h = 480.0;
    let ml = 70.0;
    let mr = 20.0;
    let mt = 40.0;
    let mb = 50.0;

    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
                x_lo = x_lo.min(x.log10());
                x_hi = x_hi.max(x.log10());
                y_lo = y_lo.min(y.log10());
                y_hi = y_hi.max(y.log10());
            }
        }
    }
    if !x_lo.is_finite() || !y_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if x_hi - x_lo < 1e-12 {
        x_hi = x_lo + 1.0;
    }
    if y_hi - y_lo < 1e-12 {
        y_hi = y_lo + 1.0;
    }
    let px = |lx: f64| ml + (lx - x_lo) / (x_hi - x_lo) * (w - ml - mr);
    let py = |ly: f64| h - mb - (ly - y_lo) / (y_hi - y_lo) * (h - mt - mb);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        xml_escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    // decade ticks
    for d in (x_lo.floor() as i64)..=(x_hi.ceil() as i64) {
        let x = px(d as f64);
        if x < ml - 1.0 || x > w - mr + 1.0 {
            continue;
        }
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{0}\" x2=\"{x}\" y2=\"{1}\" stroke=\"#999\" \
             stroke-dasharray=\"2,4\"/>\n<text x=\"{x}\" y=\"{2}\" font-family=\"sans-serif\" \
             font-size=\"11\" text-anchor=\"middle\">1e{d}</text>\n",
            mt,
            h - mb,
            h - mb + 18.0
        ));
    }
    for d in (y_lo.floor() as i64)..=(y_hi.ceil() as i64) {
        let y = py(d as f64);
        if y < mt - 1.0 || y > h - mb + 1.0 {
            continue;
        }
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{y}\" x2=\"{0}\" y2=\"{y}\" stroke=\"#999\" \
             stroke-dasharray=\"2,4\"/>\n<text x=\"{1}\" y=\"{2}\" font-family=\"sans-serif\" \
             font-size=\"11\" text-anchor=\"end\">1e{d}</text>\n",
            w - mr,
            ml - 6.0,
            y + 4.0
        ));
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut path = String::new();
        let mut pen_up = true;
        for &(x, y) in &s.points {
            if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
                pen_up = true;
                continue;
            }
            let cmd = if pen_up { 'M' } else { 'L' };
            path.push_str(&format!("{cmd}{:.2},{:.2} ", px(x.log10()), py(y.log10())));
            pen_up = false;
        }
        svg.push_str(&format!(
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{}</text>\n",
            w - mr - 150.0,
            mt + 16.0 * (i as f64 + 1.0),
            xml_escape(s.name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Manifest: configuration echo, code version, wall time.
pub fn manifest(config_echo: &str, wall_seconds: f64, extra: &[(String, String)]) -> String {
    let mut s = String::new();
    s.push_str(&format!("jmgt version = {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("wall_time_seconds = {wall_seconds:.3}\n"));
    for (k, v) in extra {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s.push_str("\n# --- configuration echo ---\n");
    s.push_str(config_echo);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_formatting_has_17_significant_digits() {
        let s = fmt_f64(std::f64::consts::PI);
        assert!(s.starts_with("3.1415926535897931"), "{s}");
        let back: f64 = s.parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn svg_is_well_formed_for_degenerate_input() {
        let svg = svg_loglog("empty", &[PlotSeries { name: "s", points: vec![] }]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        let svg = svg_loglog(
            "one",
            &[PlotSeries {
                name: "s",
                points: vec![(1.0, 1.0), (10.0, 0.1), (-1.0, 5.0)],
            }],
        );
        assert!(svg.contains("<path"));
    }
}
