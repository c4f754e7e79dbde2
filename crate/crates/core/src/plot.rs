//! Minimal static SVG line plots for the experiment CSVs. Plots are a
//! convenience; the CSVs are the contract.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 50.0;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional (lo, hi) band, same x grid as `points`.
    pub band: Option<Vec<(f64, f64)>>,
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub curves: Vec<Curve>,
}

impl LinePlot {
    pub fn render_to_file(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "{}", self.render())?;
        f.flush()?;
        Ok(())
    }

    fn transform_y(&self, y: f64) -> f64 {
        if self.log_y {
            y.max(1e-300).log10()
        } else {
            y
        }
    }

    pub fn render(&self) -> String {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        for c in &self.curves {
            for &(x, y) in &c.points {
                let ty = self.transform_y(y);
                xs = (xs.0.min(x), xs.1.max(x));
                ys = (ys.0.min(ty), ys.1.max(ty));
            }
            if let Some(band) = &c.band {
                for (&(x, _), &(lo, hi)) in c.points.iter().zip(band.iter()) {
                    xs = (xs.0.min(x), xs.1.max(x));
                    ys = (ys.0.min(self.transform_y(lo)), ys.1.max(self.transform_y(hi)));
                }
            }
        }
        if !xs.0.is_finite() || xs.0 == xs.1 {
            xs = (0.0, 1.0);
        }
        if !ys.0.is_finite() || ys.0 == ys.1 {
            ys = (ys.0.min(0.0), ys.0.min(0.0) + 1.0);
        }
        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (x - xs.0) / (xs.1 - xs.0) * plot_w;
        let py = |ty: f64| MARGIN_T + (1.0 - (ty - ys.0) / (ys.1 - ys.0)) * plot_h;

        let mut s = String::new();
        s.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            xml_escape(&self.title)
        ));

        // axes box
        s.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" fill=\"none\" stroke=\"#333\"/>\n"
        ));
        // ticks
        for i in 0..=5 {
            let fx = xs.0 + (xs.1 - xs.0) * i as f64 / 5.0;
            let x = px(fx);
            s.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
                MARGIN_T + plot_h,
                MARGIN_T + plot_h + 5.0
            ));
            s.push_str(&format!(
                "<text x=\"{x:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                MARGIN_T + plot_h + 18.0,
                format_tick(fx)
            ));
            let fy = ys.0 + (ys.1 - ys.0) * i as f64 / 5.0;
            let y = py(fy);
            s.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{MARGIN_L}\" y2=\"{y:.1}\" stroke=\"#333\"/>\n",
                MARGIN_L - 5.0
            ));
            let label = if self.log_y {
                format!("1e{}", format_tick(fy))
            } else {
                format_tick(fy)
            };
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
                MARGIN_L - 8.0,
                y + 4.0
            ));
        }
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_L + plot_w / 2.0,
            HEIGHT - 12.0,
            xml_escape(&self.x_label)
        ));
        s.push_str(&format!(
            "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
            MARGIN_T + plot_h / 2.0,
            MARGIN_T + plot_h / 2.0,
            xml_escape(&self.y_label)
        ));

        for (ci, c) in self.curves.iter().enumerate() {
            let color = COLORS[ci % COLORS.len()];
            if let Some(band) = &c.band {
                let mut d = String::from("M");
                for (&(x, _), &(lo, _)) in c.points.iter().zip(band.iter()) {
                    d.push_str(&format!(" {:.2},{:.2}", px(x), py(self.transform_y(lo))));
                }
                for (&(x, _), &(_, hi)) in c.points.iter().zip(band.iter()).rev() {
                    d.push_str(&format!(" {:.2},{:.2}", px(x), py(self.transform_y(hi))));
                }
                s.push_str(&format!(
                    "<path d=\"{d} Z\" fill=\"{color}\" opacity=\"0.15\" stroke=\"none\"/>\n"
                ));
            }
            let pts: Vec<String> = c
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(self.transform_y(y))))
                .collect();
            s.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
                pts.join(" ")
            ));
            // legend entry
            let ly = MARGIN_T + 16.0 + 18.0 * ci as f64;
            s.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                MARGIN_L + plot_w - 150.0,
                MARGIN_L + plot_w - 125.0
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
                MARGIN_L + plot_w - 120.0,
                ly + 4.0,
                xml_escape(&c.label)
            ));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_valid_svg() {
        let plot = LinePlot {
            title: "test".into(),
            x_label: "k".into(),
            y_label: "mu".into(),
            log_y: true,
            curves: vec![Curve {
                label: "c1".into(),
                points: (1..100).map(|k| (k as f64, 1.0 / k as f64)).collect(),
                band: Some((1..100).map(|k| (0.5 / k as f64, 2.0 / k as f64)).collect()),
            }],
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline"));
    }
}
