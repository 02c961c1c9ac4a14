//! Minimal static SVG line plots: linear or log axes, a few series, a legend.

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// extra point markers (x, y, label)
    pub markers: Vec<(f64, f64, String)>,
}

const W: f64 = 760.0;
const H: f64 = 520.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    } * mag;
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * span {
        out.push(t);
        t += step;
    }
    out
}

pub fn render(spec: &PlotSpec) -> String {
    let tx = |v: f64| if spec.log_x { v.log10() } else { v };
    let ty = |v: f64| if spec.log_y { v.log10() } else { v };
    let mut xlo = f64::INFINITY;
    let mut xhi = f64::NEG_INFINITY;
    let mut ylo = f64::INFINITY;
    let mut yhi = f64::NEG_INFINITY;
    for s in &spec.series {
        for &(x, y) in &s.points {
            if spec.log_x && x <= 0.0 || spec.log_y && y <= 0.0 {
                continue;
            }
            let (x, y) = (tx(x), ty(y));
            if x.is_finite() && y.is_finite() {
                xlo = xlo.min(x);
                xhi = xhi.max(x);
                ylo = ylo.min(y);
                yhi = yhi.max(y);
            }
        }
    }
    if !xlo.is_finite() {
        xlo = 0.0;
        xhi = 1.0;
        ylo = 0.0;
        yhi = 1.0;
    }
    if xhi - xlo < 1e-12 {
        xhi = xlo + 1.0;
    }
    if yhi - ylo < 1e-12 {
        yhi = ylo + 1.0;
    }
    let pad = 0.04 * (yhi - ylo);
    let (ylo, yhi) = (ylo - pad, yhi + pad);
    let px = |x: f64| ML + (x - xlo) / (xhi - xlo) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - ylo) / (yhi - ylo) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        W / 2.0,
        spec.title
    ));
    // axes
    svg.push_str(&format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        W - ML - MR,
        H - MT - MB
    ));
    for t in nice_ticks(xlo, xhi, 6) {
        let x = px(t);
        let label = if spec.log_x { format!("1e{t:.0}") } else { format!("{t:.3}") };
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#ccc\"/>\n",
            MT,
            H - MB
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{label}</text>\n",
            H - MB + 16.0
        ));
    }
    for t in nice_ticks(ylo, yhi, 6) {
        let y = py(t);
        let label = if spec.log_y { format!("1e{t:.0}") } else { format!("{t:.3}") };
        svg.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ccc\"/>\n",
            W - MR
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{label}</text>\n",
            ML - 6.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0,
        spec.x_label
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        spec.y_label
    ));
    // series
    for s in &spec.series {
        let mut path = String::new();
        let mut pen_up = true;
        for &(x, y) in &s.points {
            if spec.log_x && x <= 0.0 || spec.log_y && y <= 0.0 {
                pen_up = true;
                continue;
            }
            let (x, y) = (px(tx(x)), py(ty(y)));
            if !x.is_finite() || !y.is_finite() {
                pen_up = true;
                continue;
            }
            path.push_str(if pen_up { "M" } else { "L" });
            path.push_str(&format!("{x:.2} {y:.2} "));
            pen_up = false;
        }
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        svg.push_str(&format!(
            "<path d=\"{path}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"{dash}/>\n",
            s.color
        ));
    }
    for (x, y, label) in &spec.markers {
        let (xx, yy) = (px(tx(*x)), py(ty(*y)));
        svg.push_str(&format!(
            "<circle cx=\"{xx:.2}\" cy=\"{yy:.2}\" r=\"4\" fill=\"#d33\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" font-family=\"sans-serif\">{label}</text>\n",
            xx + 7.0,
            yy - 5.0
        ));
    }
    // legend
    let mut ly = MT + 14.0;
    for s in &spec.series {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{}\" stroke-width=\"2\"/>\n<text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\">{}</text>\n",
            ML + 10.0,
            ML + 34.0,
            s.color,
            ML + 40.0,
            ly + 4.0,
            s.label
        ));
        ly += 16.0;
    }
    svg.push_str("</svg>\n");
    svg
}
