//! Minimal SVG plotting: polylines, filled bands, axes with ticks. No
//! external plotting dependency.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub struct Band {
    pub lower: Vec<(f64, f64)>,
    pub upper: Vec<(f64, f64)>,
    pub fill: String,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series<'a>>,
    pub band: Option<Band>,
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
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
    let start = (lo / step).ceil() * step;
    let mut out = Vec::new();
    let mut t = start;
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

impl Plot<'_> {
    pub fn render(&self) -> String {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for (x, y) in &s.points {
                xs.push(*x);
                ys.push(*y);
            }
        }
        if let Some(b) = &self.band {
            for (x, y) in b.lower.iter().chain(&b.upper) {
                xs.push(*x);
                ys.push(*y);
            }
        }
        if xs.is_empty() {
            xs = vec![0.0, 1.0];
            ys = vec![0.0, 1.0];
        }
        let (x_lo, x_hi) = bounds(&xs);
        let (mut y_lo, mut y_hi) = bounds(&ys);
        if y_hi == y_lo {
            y_hi += 1.0;
            y_lo -= 1.0;
        }
        let pad = 0.04 * (y_hi - y_lo);
        y_lo -= pad;
        y_hi += pad;

        let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut out = String::new();
        let _ = write!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        );
        let _ = write!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            escape(self.title)
        );

        // axes
        let _ = write!(
            out,
            "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
            l = MARGIN_L,
            r = WIDTH - MARGIN_R,
            t = MARGIN_T,
            b = HEIGHT - MARGIN_B
        );
        for t in nice_ticks(x_lo, x_hi, 6) {
            let x = px(t);
            let _ = write!(
                out,
                "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/>\n<text x=\"{x}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{t:.6}</text>\n",
                b = HEIGHT - MARGIN_B,
                b2 = HEIGHT - MARGIN_B + 5.0,
                ty = HEIGHT - MARGIN_B + 18.0,
                t = trim(t)
            );
        }
        for t in nice_ticks(y_lo, y_hi, 6) {
            let y = py(t);
            let _ = write!(
                out,
                "<line x1=\"{l}\" y1=\"{y}\" x2=\"{l2}\" y2=\"{y}\" stroke=\"black\"/>\n<text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{t:.6}</text>\n",
                l = MARGIN_L - 5.0,
                l2 = MARGIN_L,
                tx = MARGIN_L - 8.0,
                ty = y + 4.0,
                t = trim(t)
            );
        }
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            HEIGHT - 12.0,
            escape(self.x_label)
        );
        let _ = write!(
            out,
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            escape(self.y_label)
        );

        if let Some(band) = &self.band {
            let mut d = String::from("M");
            for (x, y) in &band.lower {
                let _ = write!(d, " {:.2},{:.2}", px(*x), py(*y));
            }
            for (x, y) in band.upper.iter().rev() {
                let _ = write!(d, " {:.2},{:.2}", px(*x), py(*y));
            }
            let _ = write!(out, "<path d=\"{d} Z\" fill=\"{}\" stroke=\"none\"/>\n", band.fill);
        }

        for s in &self.series {
            let mut pts = String::new();
            for (x, y) in &s.points {
                let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(*y));
            }
            let _ = write!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                pts.trim_end(),
                s.color
            );
        }

        // legend
        let mut ly = MARGIN_T + 6.0;
        for s in &self.series {
            let _ = write!(
                out,
                "<line x1=\"{x}\" y1=\"{ly}\" x2=\"{x2}\" y2=\"{ly}\" stroke=\"{c}\" stroke-width=\"2\"/><text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\">{t}</text>\n",
                x = WIDTH - MARGIN_R - 150.0,
                x2 = WIDTH - MARGIN_R - 128.0,
                c = s.color,
                tx = WIDTH - MARGIN_R - 122.0,
                ty = ly + 4.0,
                t = escape(s.label)
            );
            ly += 16.0;
        }

        out.push_str("</svg>\n");
        out
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn trim(t: f64) -> String {
    if t == t.round() && t.abs() < 1e7 {
        format!("{}", t as i64)
    } else {
        format!("{t:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
