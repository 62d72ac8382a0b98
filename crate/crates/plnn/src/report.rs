//! Interpretation artifacts: parallel-coordinate plots of region equations,
//! matrix plots of per-instance slopes, 2-D region/boundary plots, and the
//! exact textual report.
//!
//! Every plot is backed by a CSV companion holding the plotted values; the
//! SVG is rendered from the same rows, so the CSV is the source of truth.
//! All outputs are byte-deterministic: no timestamps, shortest round-trip
//! decimals for data values, fixed two-decimal pixel coordinates.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::Array1;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::flatten::FlatNetwork;
use crate::model::{Configuration, Plnn, Region};

/// A rendered plot: the SVG document and its CSV companion.
#[derive(Debug, Clone)]
pub struct PlotBundle {
    pub svg: String,
    pub csv: String,
}

/// Fixed 12-color categorical cycle; configurations are assigned colors by
/// hashing their bitstring, so a region keeps its color across plots.
const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
];

/// FNV-1a over the bitstring, reduced into the palette.
pub fn config_color(config: &Configuration) -> &'static str {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in config.bitstring().bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    PALETTE[(h % PALETTE.len() as u64) as usize]
}

/// 17 significant digits: enough to reconstruct the exact f64.
fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pixel coordinate formatting (presentation only, never data).
fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// ---------------------------------------------------------------------------
// Minimal SVG builder
// ---------------------------------------------------------------------------

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Svg {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        writeln!(
            self.body,
            r#"  <line x1="{}" y1="{}" x2="{}" y2="{}" style="{style}"/>"#,
            px(x1),
            px(y1),
            px(x2),
            px(y2)
        )
        .unwrap();
    }

    fn polyline(&mut self, pts: &[(f64, f64)], style: &str) {
        let mut d = String::new();
        for (i, (x, y)) in pts.iter().enumerate() {
            if i > 0 {
                d.push(' ');
            }
            write!(d, "{},{}", px(*x), px(*y)).unwrap();
        }
        writeln!(self.body, r#"  <polyline points="{d}" style="{style}"/>"#).unwrap();
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, style: &str) {
        writeln!(
            self.body,
            r#"  <circle cx="{}" cy="{}" r="{}" style="{style}"/>"#,
            px(cx),
            px(cy),
            px(r)
        )
        .unwrap();
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, style: &str) {
        writeln!(
            self.body,
            r#"  <rect x="{}" y="{}" width="{}" height="{}" style="{style}"/>"#,
            px(x),
            px(y),
            px(w),
            px(h)
        )
        .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, s: &str) {
        writeln!(
            self.body,
            r#"  <text x="{}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="{}">{}</text>"#,
            px(x),
            px(y),
            px(size),
            escape_text(s)
        )
        .unwrap();
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{body}</svg>\n",
            w = px(self.width),
            h = px(self.height),
            body = self.body
        )
    }
}

// ---------------------------------------------------------------------------
// Parallel-coordinate plot
// ---------------------------------------------------------------------------

/// Filters for [`pc_plot`].
#[derive(Debug, Clone, Default)]
pub struct PcOptions {
    /// Restrict the axes to this predictor subset (plot order follows it).
    pub predictors: Option<Vec<String>>,
    /// Keep only regions holding instances of both classes.
    pub mixed_only: bool,
    /// Keep only the k most-populated regions.
    pub top_k: Option<usize>,
}

struct PcRow {
    config: String,
    instances: usize,
    weights: Vec<f64>,
}

/// Parallel-coordinate plot of each region's equation weights across
/// predictors: one polyline per region, linewidth proportional to the
/// region's instance count (floored at 0.5 px).
pub fn pc_plot(census: &[Region], predictors: &[String], options: &PcOptions) -> Result<PlotBundle> {
    if census.is_empty() {
        return Err(Error::InvalidParameter("pc_plot needs a nonempty census".into()));
    }
    for region in census {
        if region.equation.w.len() != predictors.len() {
            return Err(Error::ShapeMismatch {
                expected: predictors.len(),
                got: region.equation.w.len(),
            });
        }
    }
    let columns: Vec<usize> = match &options.predictors {
        Some(subset) => {
            if subset.is_empty() {
                return Err(Error::InvalidParameter("predictor subset is empty".into()));
            }
            subset
                .iter()
                .map(|name| {
                    predictors
                        .iter()
                        .position(|p| p == name)
                        .ok_or_else(|| Error::UnknownPredictor(name.clone()))
                })
                .collect::<Result<_>>()?
        }
        None => (0..predictors.len()).collect(),
    };
    if options.top_k == Some(0) {
        return Err(Error::InvalidParameter("top_k must be at least 1".into()));
    }

    let mut picked: Vec<&Region> = census.iter().filter(|r| !options.mixed_only || r.is_mixed()).collect();
    // Most-populated regions first; census order breaks ties.
    picked.sort_by_key(|r| std::cmp::Reverse(r.instance_count));
    if let Some(k) = options.top_k {
        picked.truncate(k);
    }

    let rows: Vec<PcRow> = picked
        .iter()
        .map(|r| PcRow {
            config: r.config.bitstring(),
            instances: r.instance_count,
            weights: columns.iter().map(|&c| r.equation.w[c]).collect(),
        })
        .collect();

    let mut csv = String::from("config,instances");
    for &c in &columns {
        write!(csv, ",{}", csv_field(&predictors[c])).unwrap();
    }
    csv.push('\n');
    for row in &rows {
        write!(csv, "{},{}", csv_field(&row.config), row.instances).unwrap();
        for w in &row.weights {
            write!(csv, ",{w}").unwrap();
        }
        csv.push('\n');
    }

    Ok(PlotBundle {
        svg: render_pc_svg(&rows, &columns, predictors),
        csv,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_pc_svg(rows: &[PcRow], columns: &[usize], predictors: &[String]) -> String {
    let k = columns.len();
    let (ml, mr, mt, mb) = (60.0, 180.0, 40.0, 50.0);
    let gap = 90.0;
    let plot_w = gap * (k.saturating_sub(1)) as f64;
    let plot_h = 320.0;
    let mut svg = Svg::new(ml + plot_w + mr, mt + plot_h + mb);

    let amp = rows
        .iter()
        .flat_map(|r| r.weights.iter())
        .fold(0.0f64, |a, &w| a.max(w.abs()))
        .max(1e-12);
    let max_count = rows.iter().map(|r| r.instances).max().unwrap_or(1).max(1);
    let x_at = |i: usize| ml + gap * i as f64;
    let y_at = |w: f64| mt + plot_h / 2.0 - (w / amp) * (plot_h / 2.0);

    svg.text(ml, mt - 18.0, "start", 13.0, "Region linear-equation weights");
    // Zero line and axes.
    svg.line(
        ml,
        y_at(0.0),
        ml + plot_w,
        y_at(0.0),
        "stroke:#999;stroke-width:0.6;stroke-dasharray:3 3",
    );
    for (i, &c) in columns.iter().enumerate() {
        svg.line(x_at(i), mt, x_at(i), mt + plot_h, "stroke:#444;stroke-width:1");
        svg.text(x_at(i), mt + plot_h + 16.0, "middle", 11.0, &predictors[c]);
    }
    svg.text(ml - 8.0, y_at(amp) + 4.0, "end", 10.0, &format!("{amp:.3}"));
    svg.text(ml - 8.0, y_at(0.0) + 4.0, "end", 10.0, "0");
    svg.text(ml - 8.0, y_at(-amp) + 4.0, "end", 10.0, &format!("{:.3}", -amp));

    for (idx, row) in rows.iter().enumerate() {
        let config = Configuration::parse(&row.config).unwrap_or_else(|_| Configuration::new(vec![]));
        let color = config_color(&config);
        let width = (6.0 * row.instances as f64 / max_count as f64).max(0.5);
        let pts: Vec<(f64, f64)> = row
            .weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (x_at(i), y_at(w)))
            .collect();
        svg.polyline(
            &pts,
            &format!("fill:none;stroke:{color};stroke-width:{};stroke-opacity:0.85", px(width)),
        );
        // Legend entry.
        let ly = mt + 14.0 * idx as f64;
        svg.line(ml + plot_w + 16.0, ly, ml + plot_w + 40.0, ly, &format!("stroke:{color};stroke-width:{}", px(width)));
        svg.text(
            ml + plot_w + 46.0,
            ly + 4.0,
            "start",
            10.0,
            &format!("{} (n={})", row.config, row.instances),
        );
    }
    svg.finish()
}

// ---------------------------------------------------------------------------
// Matrix plot
// ---------------------------------------------------------------------------

struct MatrixRow {
    instance: usize,
    x_pred: usize,
    slope_pred: usize,
    x: f64,
    slope: f64,
}

/// Matrix plot of per-instance slopes: grid cell (i, j) scatters the value
/// of predictor i against dy/dx_j of the instance's region equation (the
/// logit slope Ŵ_j of the instance's configuration).
pub fn matrix_plot(net: &Plnn, data: &Dataset, predictors: &[String]) -> Result<PlotBundle> {
    if data.num_features() != net.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: net.input_dim(),
            got: data.num_features(),
        });
    }
    if predictors.is_empty() {
        return Err(Error::InvalidParameter("matrix_plot needs at least one predictor".into()));
    }
    let cols: Vec<usize> = predictors
        .iter()
        .map(|name| {
            data.feature_names
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| Error::UnknownPredictor(name.clone()))
        })
        .collect::<Result<_>>()?;

    let configs = net.configurations_batch(data.x.view())?;
    let mut equations: HashMap<&Configuration, Array1<f64>> = HashMap::new();
    for c in &configs {
        if !equations.contains_key(c) {
            equations.insert(c, net.linear_equation(c)?.w);
        }
    }

    let k = cols.len();
    let mut rows: Vec<MatrixRow> = Vec::with_capacity(data.len() * k * k);
    for (n, c) in configs.iter().enumerate() {
        let w = &equations[c];
        for (i, &ci) in cols.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                rows.push(MatrixRow {
                    instance: n,
                    x_pred: i,
                    slope_pred: j,
                    x: data.x[[n, ci]],
                    slope: w[cj],
                });
            }
        }
    }

    let mut csv = String::from("instance,x_predictor,slope_predictor,x,slope\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.instance,
            csv_field(predictors[r.x_pred].as_str()),
            csv_field(predictors[r.slope_pred].as_str()),
            r.x,
            r.slope
        )
        .unwrap();
    }

    Ok(PlotBundle {
        svg: render_matrix_svg(&rows, predictors, &configs),
        csv,
    })
}

fn render_matrix_svg(rows: &[MatrixRow], predictors: &[String], configs: &[Configuration]) -> String {
    let k = predictors.len();
    let (cell_w, cell_h, pad) = (150.0, 130.0, 14.0);
    let (ml, mt) = (70.0, 40.0);
    let width = ml + k as f64 * (cell_w + pad);
    let height = mt + k as f64 * (cell_h + pad) + 40.0;
    let mut svg = Svg::new(width, height);
    svg.text(ml, mt - 16.0, "start", 13.0, "Per-instance slopes dy/dx_j vs x_i");

    // Per-cell ranges: x from the data, slope symmetric about 0 per column.
    let mut x_range = vec![(f64::INFINITY, f64::NEG_INFINITY); k];
    let mut amp = vec![1e-12f64; k];
    for r in rows {
        let (lo, hi) = x_range[r.x_pred];
        x_range[r.x_pred] = (lo.min(r.x), hi.max(r.x));
        amp[r.slope_pred] = amp[r.slope_pred].max(r.slope.abs());
    }

    for i in 0..k {
        for j in 0..k {
            let ox = ml + i as f64 * (cell_w + pad);
            let oy = mt + j as f64 * (cell_h + pad);
            svg.rect(ox, oy, cell_w, cell_h, "fill:none;stroke:#bbb;stroke-width:0.8");
            let mid = oy + cell_h / 2.0;
            svg.line(ox, mid, ox + cell_w, mid, "stroke:#ddd;stroke-width:0.6;stroke-dasharray:2 3");
            if j == k - 1 {
                svg.text(ox + cell_w / 2.0, oy + cell_h + pad + 12.0, "middle", 11.0, &predictors[i]);
            }
            if i == 0 {
                svg.text(ox - 8.0, mid + 4.0, "end", 11.0, &format!("d{}", predictors[j]));
            }
        }
    }
    for r in rows {
        let (lo, hi) = x_range[r.x_pred];
        let span = (hi - lo).max(1e-12);
        let ox = ml + r.x_pred as f64 * (cell_w + pad);
        let oy = mt + r.slope_pred as f64 * (cell_h + pad);
        let cx = ox + (r.x - lo) / span * cell_w;
        let cy = oy + cell_h / 2.0 - (r.slope / amp[r.slope_pred]) * (cell_h / 2.0 - 4.0);
        let color = config_color(&configs[r.instance]);
        svg.circle(cx, cy, 1.6, &format!("fill:{color};fill-opacity:0.6"));
    }
    svg.finish()
}

// ---------------------------------------------------------------------------
// 2-D region plot
// ---------------------------------------------------------------------------

/// The decision-boundary line of each observed nontrivial region, clipped
/// to that region's inequalities and to the given window. Each entry is
/// (configuration, [x1, y1, x2, y2]). This is the exact geometry that
/// [`region_plot_2d`] draws.
pub fn boundary_segments(
    net: &Plnn,
    configs: &[Configuration],
    x_window: (f64, f64),
    y_window: (f64, f64),
) -> Result<Vec<(Configuration, [f64; 4])>> {
    if net.input_dim() != 2 {
        return Err(Error::ShapeMismatch {
            expected: 2,
            got: net.input_dim(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    let mut segments = Vec::new();
    for c in configs {
        if !seen.insert(c.clone()) || net.is_trivial(c)? {
            continue;
        }
        let eq = net.linear_equation(c)?;
        let n2 = eq.w.dot(&eq.w);
        if n2 < 1e-24 {
            continue; // zero-weight region: no boundary line
        }
        // Parameterize the line Ŵ·z + B̂ = 0 and clip the parameter range.
        let z0 = (&eq.w * (-eq.b / n2)).to_owned();
        let dir = Array1::from(vec![-eq.w[1], eq.w[0]]) / n2.sqrt();
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let mut feasible = true;
        // Half-plane constraints: the region's own inequalities plus the
        // plot window, all expressed as a·t + g ≥ 0.
        let mut constraints: Vec<(f64, f64)> = Vec::new();
        for ineq in net.region_inequalities(c)? {
            let sign = match ineq.sense {
                crate::model::Sense::Geq => 1.0,
                crate::model::Sense::Lt => -1.0,
            };
            constraints.push((
                sign * ineq.w.dot(&dir),
                sign * (ineq.w.dot(&z0) + ineq.b),
            ));
        }
        for (h, b) in [
            ([1.0, 0.0], -x_window.0),
            ([-1.0, 0.0], x_window.1),
            ([0.0, 1.0], -y_window.0),
            ([0.0, -1.0], y_window.1),
        ] {
            let h = Array1::from(h.to_vec());
            constraints.push((h.dot(&dir), h.dot(&z0) + b));
        }
        for (a, g) in constraints {
            if a.abs() < 1e-14 {
                if g < -1e-12 {
                    feasible = false;
                    break;
                }
            } else if a > 0.0 {
                lo = lo.max(-g / a);
            } else {
                hi = hi.min(-g / a);
            }
        }
        if feasible && lo < hi - 1e-12 && lo.is_finite() && hi.is_finite() {
            let p = &z0 + &(&dir * lo);
            let q = &z0 + &(&dir * hi);
            segments.push((c.clone(), [p[0], p[1], q[0], q[1]]));
        }
    }
    Ok(segments)
}

/// Figure-2-style plot: instances scattered in the plane colored by their
/// configuration (class-1 points outlined), plus each nontrivial region's
/// decision boundary clipped to the region.
pub fn region_plot_2d(net: &Plnn, data: &Dataset) -> Result<String> {
    if net.input_dim() != 2 || data.num_features() != 2 {
        return Err(Error::ShapeMismatch {
            expected: 2,
            got: if net.input_dim() != 2 { net.input_dim() } else { data.num_features() },
        });
    }
    let configs = net.configurations_batch(data.x.view())?;
    let (mut xmin, mut xmax, mut ymin, mut ymax) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for row in data.x.rows() {
        xmin = xmin.min(row[0]);
        xmax = xmax.max(row[0]);
        ymin = ymin.min(row[1]);
        ymax = ymax.max(row[1]);
    }
    let pad_x = 0.08 * (xmax - xmin).max(1e-9);
    let pad_y = 0.08 * (ymax - ymin).max(1e-9);
    let x_window = (xmin - pad_x, xmax + pad_x);
    let y_window = (ymin - pad_y, ymax + pad_y);
    let segments = boundary_segments(net, &configs, x_window, y_window)?;

    let (ml, mr, mt, mb) = (55.0, 160.0, 40.0, 45.0);
    let (plot_w, plot_h) = (420.0, 420.0);
    let mut svg = Svg::new(ml + plot_w + mr, mt + plot_h + mb);
    let sx = |v: f64| ml + (v - x_window.0) / (x_window.1 - x_window.0) * plot_w;
    let sy = |v: f64| mt + plot_h - (v - y_window.0) / (y_window.1 - y_window.0) * plot_h;

    svg.text(ml, mt - 16.0, "start", 13.0, "Activation regions and decision boundaries");
    svg.rect(ml, mt, plot_w, plot_h, "fill:none;stroke:#444;stroke-width:1");
    svg.text(ml - 6.0, sy(y_window.0) + 4.0, "end", 10.0, &format!("{:.2}", y_window.0));
    svg.text(ml - 6.0, sy(y_window.1) + 4.0, "end", 10.0, &format!("{:.2}", y_window.1));
    svg.text(sx(x_window.0), mt + plot_h + 16.0, "middle", 10.0, &format!("{:.2}", x_window.0));
    svg.text(sx(x_window.1), mt + plot_h + 16.0, "middle", 10.0, &format!("{:.2}", x_window.1));
    svg.text(ml, mt + plot_h + 32.0, "start", 10.0, &format!("{}  (x)", data.feature_names[0]));
    svg.text(ml, mt + plot_h + 44.0, "start", 10.0, &format!("{}  (y)", data.feature_names[1]));

    for (n, c) in configs.iter().enumerate() {
        let style = if data.y[n] == 0 {
            format!("fill:{};fill-opacity:0.55", config_color(c))
        } else {
            format!("fill:{};stroke:#222;stroke-width:0.7", config_color(c))
        };
        svg.circle(sx(data.x[[n, 0]]), sy(data.x[[n, 1]]), 2.6, &style);
    }
    for (c, [x1, y1, x2, y2]) in &segments {
        svg.line(
            sx(*x1),
            sy(*y1),
            sx(*x2),
            sy(*y2),
            &format!("stroke:{};stroke-width:2.2;stroke-opacity:0.95", config_color(c)),
        );
    }

    // Legend: distinct configurations in first-occurrence order.
    let mut seen = std::collections::HashSet::new();
    let mut row = 0;
    for c in &configs {
        if !seen.insert(c.clone()) {
            continue;
        }
        let ly = mt + 14.0 * row as f64;
        svg.circle(ml + plot_w + 24.0, ly, 3.5, &format!("fill:{}", config_color(c)));
        svg.text(ml + plot_w + 34.0, ly + 4.0, "start", 10.0, &c.bitstring());
        row += 1;
    }
    Ok(svg.finish())
}

// ---------------------------------------------------------------------------
// Exact textual interpretation
// ---------------------------------------------------------------------------

/// Exact textual interpretation of a flat network: for every active
/// configuration, the region-defining inequalities (sense picked by the
/// configuration bit) and the local linear equation, all coefficients at
/// 17 significant digits.
pub fn exact_interpretation(flat: &FlatNetwork, census: &[Region]) -> String {
    let rule = "-".repeat(72);
    let mut out = String::new();
    let title = format!("Exact Interpretation of {}-Neuron Network", flat.width());
    writeln!(out, "{title}").unwrap();
    writeln!(out, "{}", "=".repeat(title.len())).unwrap();
    out.push('\n');

    writeln!(out, "Region Boundary Inequalities").unwrap();
    writeln!(out, "{}", "-".repeat(28)).unwrap();
    for region in census {
        writeln!(out, "\nConfiguration '{}':", region.config.bitstring()).unwrap();
        writeln!(out, "{rule}").unwrap();
        for ineq in &region.inequalities {
            writeln!(out, "{} . x {} {} 0", vector17(&ineq.w), signed17(ineq.b), ineq.sense).unwrap();
            writeln!(out, "{rule}").unwrap();
        }
    }

    writeln!(out, "\nLocal Linear Equations").unwrap();
    writeln!(out, "{}", "-".repeat(22)).unwrap();
    for region in census {
        writeln!(out, "\nConfiguration '{}':", region.config.bitstring()).unwrap();
        writeln!(out, "{rule}").unwrap();
        writeln!(out, "z = {} . x {}", vector17(&region.equation.w), signed17(region.equation.b)).unwrap();
        writeln!(out, "{rule}").unwrap();
    }
    out
}

fn vector17(w: &Array1<f64>) -> String {
    let mut s = String::from("[");
    for (i, v) in w.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(&sig17(*v));
    }
    s.push(']');
    s
}

fn signed17(b: f64) -> String {
    if b.is_sign_negative() {
        format!("- {}", sig17(-b))
    } else {
        format!("+ {}", sig17(b))
    }
}
