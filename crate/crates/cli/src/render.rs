//! Static SVG figures: state-space scatter and sweep heatmap.
//!
//! Output is plain text built with fixed-precision formatting, so identical
//! inputs give byte-identical files.

use std::fmt::Write;

use esn_fractal::{Error, Result, StateCloud, SweepResult, Symbol};

/// Points drawn by default before stride subsampling kicks in.
pub const DEFAULT_MAX_POINTS: usize = 100_000;

pub const MINUS_COLOR: &str = "#1f77b4";
pub const PLUS_COLOR: &str = "#d62728";

const SIZE: f64 = 600.0;
const MARGIN: f64 = 50.0;

fn plot_x(x: f64) -> f64 {
    MARGIN + (x + 1.0) / 2.0 * (SIZE - 2.0 * MARGIN)
}

fn plot_y(y: f64) -> f64 {
    SIZE - MARGIN - (y + 1.0) / 2.0 * (SIZE - 2.0 * MARGIN)
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

/// Scatter of a 2-neuron cloud over `[-1, 1]^2`, colored by label. Every
/// `ceil(n / max_points)`-th point is drawn.
pub fn render_scatter(cloud: &StateCloud, max_points: usize) -> Result<String> {
    if cloud.dim() != 2 {
        return Err(Error::InvalidParameter(format!(
            "render requires 2 neurons, cloud has {}",
            cloud.dim()
        )));
    }
    if max_points == 0 {
        return Err(Error::InvalidParameter("max_points must be positive".into()));
    }
    let mut s = String::new();
    header(&mut s, SIZE, SIZE);
    let (lo, hi) = (plot_x(-1.0), plot_x(1.0));
    let _ = writeln!(
        s,
        r#"<rect x="{lo:.2}" y="{lo:.2}" width="{w:.2}" height="{w:.2}" fill="none" stroke="black"/>"#,
        w = hi - lo
    );
    let _ = writeln!(
        s,
        r##"<g stroke="#bbbbbb"><line x1="{lo:.2}" y1="{c:.2}" x2="{hi:.2}" y2="{c:.2}"/><line x1="{c:.2}" y1="{lo:.2}" x2="{c:.2}" y2="{hi:.2}"/></g>"##,
        c = plot_x(0.0)
    );
    for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            plot_x(t),
            hi + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t}</text>"#,
            lo - 6.0,
            plot_y(t) + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x1</text>"#, SIZE / 2.0, SIZE - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">x2</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );

    let stride = cloud.len().div_ceil(max_points).max(1);
    for (color, label) in [(MINUS_COLOR, Symbol::Minus), (PLUS_COLOR, Symbol::Plus)] {
        let _ = writeln!(s, r#"<g fill="{color}" class="label{label}">"#);
        for p in cloud.points().step_by(stride).filter(|p| p.label == label) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="0.8"/>"#,
                plot_x(p.coords[0]),
                plot_y(p.coords[1])
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Viridis anchors, low to high.
const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

/// Ramp color at `t` in `[0, 1]`.
pub fn ramp_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

const MISSING_COLOR: &str = "#cccccc";

fn tick_labels(values: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
    let every = values.len().div_ceil(10).max(1);
    values.iter().copied().enumerate().filter(move |(i, _)| i % every == 0)
}

/// Heatmap of `d_f` with alpha on x and beta on y; failed cells are grey.
pub fn render_surface(result: &SweepResult) -> Result<String> {
    if result.cells.is_empty() {
        return Err(Error::EmptyGrid("sweep has no cells"));
    }
    if let Some(c) = result.cells.iter().find(|c| !(c.alpha.is_finite() && c.beta.is_finite())) {
        return Err(Error::NonFinite(if c.alpha.is_finite() { "beta" } else { "alpha" }));
    }
    let (alphas, betas) = result.axes();
    if alphas.len() * betas.len() != result.cells.len() {
        return Err(Error::InvalidParameter(format!(
            "ragged grid: {} cells for {} alphas x {} betas",
            result.cells.len(),
            alphas.len(),
            betas.len()
        )));
    }
    let mut grid = vec![None; alphas.len() * betas.len()];
    for c in &result.cells {
        let i = alphas.iter().position(|&a| a == c.alpha).expect("alpha from axes");
        let j = betas.iter().position(|&b| b == c.beta).expect("beta from axes");
        if grid[j * alphas.len() + i].replace(c).is_some() {
            return Err(Error::InvalidParameter(format!(
                "ragged grid: duplicate cell alpha={} beta={}",
                c.alpha, c.beta
            )));
        }
    }
    let finite = result.cells.iter().filter(|c| c.error.is_none() && c.d_f.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), c| {
        (l.min(c.d_f), h.max(c.d_f))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };

    let (plot_w, plot_h) = (480.0, 480.0);
    let (left, top) = (70.0, 30.0);
    let (width, height) = (left + plot_w + 130.0, top + plot_h + 60.0);
    let cw = plot_w / alphas.len() as f64;
    let ch = plot_h / betas.len() as f64;

    let mut s = String::new();
    header(&mut s, width, height);
    for (j, &b) in betas.iter().enumerate() {
        for (i, &a) in alphas.iter().enumerate() {
            let cell = grid[j * alphas.len() + i].expect("rectangular grid");
            let ok = cell.error.is_none() && cell.d_f.is_finite();
            let fill = if ok { ramp_color((cell.d_f - lo) / span) } else { MISSING_COLOR.to_string() };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"><title>alpha={a} beta={b} d_f={}</title></rect>"#,
                left + i as f64 * cw,
                top + plot_h - (j + 1) as f64 * ch,
                cw,
                ch,
                if ok { format!("{:.4}", cell.d_f) } else { "n/a".into() },
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    for (i, a) in tick_labels(&alphas) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{a}</text>"#,
            left + (i as f64 + 0.5) * cw,
            top + plot_h + 16.0
        );
    }
    for (j, b) in tick_labels(&betas) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{b}</text>"#,
            left - 6.0,
            top + plot_h - (j as f64 + 0.5) * ch + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">alpha</text>"#,
        left + plot_w / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">beta</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    // color scale
    let (lx, steps) = (left + plot_w + 30.0, 20);
    let sh = plot_h / steps as f64;
    let _ = writeln!(s, r#"<g class="legend">"#);
    for k in 0..steps {
        let t = (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="{:.2}" width="20" height="{:.2}" fill="{}"/>"#,
            top + plot_h - (k + 1) as f64 * sh,
            sh,
            ramp_color(t)
        );
    }
    if lo.is_finite() {
        for (v, y) in [(hi, top + 4.0), (lo, top + plot_h + 4.0)] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}">{v:.3}</text>"#, lx + 26.0);
        }
    }
    let _ = writeln!(s, r#"<text x="{lx:.2}" y="{:.2}">d_f</text>"#, top - 10.0);
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}
