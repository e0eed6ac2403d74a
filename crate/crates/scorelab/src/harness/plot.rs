//! Minimal self-contained SVG line charts. Data-first output lives in the
//! CSVs; these charts are a quick visual companion, nothing more.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Render named series as polylines. Log axes transform the data; points
/// with non-positive coordinates on a log axis are dropped.
pub fn line_chart_svg(
    title: &str,
    series: &[(String, Vec<(f64, f64)>)],
    log_x: bool,
    log_y: bool,
) -> String {
    let tx = |v: f64| if log_x { v.ln() } else { v };
    let ty = |v: f64| if log_y { v.ln() } else { v };
    let mut pts: Vec<Vec<(f64, f64)>> = Vec::new();
    for (_, data) in series {
        pts.push(
            data.iter()
                .filter(|(x, y)| (!log_x || *x > 0.0) && (!log_y || *y > 0.0))
                .map(|&(x, y)| (tx(x), ty(y)))
                .collect(),
        );
    }
    let flat: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    let (x0, x1) = span(flat.iter().map(|p| p.0));
    let (y0, y1) = span(flat.iter().map(|p| p.1));
    let sx = (WIDTH - 2.0 * MARGIN) / (x1 - x0);
    let sy = (HEIGHT - 2.0 * MARGIN) / (y1 - y0);
    let px = |x: f64| MARGIN + (x - x0) * sx;
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) * sy;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" \
         font-family=\"sans-serif\">{}</text>\n",
        WIDTH / 2.0,
        xml_escape(title)
    );
    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    // corner tick labels (raw values)
    let label = |v: f64, log: bool| {
        let raw = if log { v.exp() } else { v };
        format!("{raw:.3e}")
    };
    svg.push_str(&format!(
        "<text x=\"{m}\" y=\"{by}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>\n\
         <text x=\"{rx}\" y=\"{by}\" text-anchor=\"end\" font-size=\"11\" \
         font-family=\"sans-serif\">{}</text>\n\
         <text x=\"{lx}\" y=\"{m2}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>\n\
         <text x=\"{lx}\" y=\"{bly}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>\n",
        label(x0, log_x),
        label(x1, log_x),
        label(y1, log_y),
        label(y0, log_y),
        m = MARGIN,
        by = HEIGHT - MARGIN + 16.0,
        rx = WIDTH - MARGIN,
        lx = 4.0,
        m2 = MARGIN + 4.0,
        bly = HEIGHT - MARGIN,
    ));
    for (i, ((name, _), path)) in series.iter().zip(&pts).enumerate() {
        if path.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = path
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        for &(x, y) in path {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>\n",
                px(x),
                py(y)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\" \
             font-family=\"sans-serif\">{}</text>\n",
            WIDTH - MARGIN + 4.0,
            MARGIN + 16.0 * i as f64,
            xml_escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
