//! Deterministic SVG plots with companion CSVs of the plotted points.

use std::fmt::Write as _;

use crate::design_search::SweepRow;
use crate::error::{Error, Result};

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const MARGIN: f64 = 60.0;

struct Frame {
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(width: u32, height: u32, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self {
            width: width as f64,
            height: height as f64,
            x: pad(x),
            y: pad(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 2.0 * MARGIN)
    }

    fn open(&self, svg: &mut String, hash: &str, title: &str, x_label: &str, y_label: &str) {
        let (w, h) = (self.width, self.height);
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
        );
        let _ = writeln!(svg, "<!-- manifest: {hash} -->");
        let _ = writeln!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>",
            w / 2.0
        );
        let (x0, x1, y0, y1) = (MARGIN, w - MARGIN, h - MARGIN, MARGIN);
        let _ = writeln!(
            svg,
            "<path d=\"M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}\" fill=\"none\" stroke=\"black\"/>"
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                self.px(xv),
                y0 + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                x0 - 6.0,
                self.py(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{x_label}</text>",
            w / 2.0,
            h - 16.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 {:.1})\">{y_label}</text>",
            h / 2.0,
            h / 2.0
        );
    }

    fn legend(&self, svg: &mut String, entries: &[(&str, &str)]) {
        for (k, (name, color)) in entries.iter().enumerate() {
            let y = MARGIN + 14.0 * k as f64;
            let x = self.width - MARGIN - 110.0;
            let _ = writeln!(svg, "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>", y - 9.0);
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"11\">{name}</text>",
                x + 14.0
            );
        }
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Sensitivity against force range of every feasible design, one colour per
/// material. Sensitivity is plotted as log₁₀. Returns (svg, points csv).
pub fn sweep_report(rows: &[SweepRow], hash: &str, width: u32, height: u32) -> Result<(String, String)> {
    let points: Vec<&SweepRow> = rows.iter().filter(|r| r.feasible).collect();
    if points.is_empty() {
        return Err(Error::Validation("sweep report needs at least one feasible design".into()));
    }
    let range = |r: &SweepRow| r.range_fx_n.min(r.range_fz_n);
    let sens = |r: &SweepRow| r.sensitivity_fx_g_per_n.max(1e-12).log10();
    let mut materials: Vec<&str> = points.iter().map(|r| r.material.as_str()).collect();
    materials.sort_unstable();
    materials.dedup();
    let frame = Frame::new(width, height, extent(points.iter().map(|r| range(r))), extent(points.iter().map(|r| sens(r))));
    let mut svg = String::new();
    frame.open(
        &mut svg,
        hash,
        "Design sweep: sensitivity vs force range",
        "force range, min over axes [N]",
        "log10 sensitivity F_x [G/N]",
    );
    let mut csv = super::output::csv_header(hash);
    csv.push_str("index,material,range_n,sensitivity_fx_g_per_n\n");
    for r in &points {
        let color = PALETTE[materials.iter().position(|m| *m == r.material).unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\" fill-opacity=\"0.6\"/>",
            frame.px(range(r)),
            frame.py(sens(r))
        );
        let _ = writeln!(csv, "{},{},{},{}", r.index, r.material, range(r), r.sensitivity_fx_g_per_n);
    }
    let legend: Vec<(&str, &str)> = materials
        .iter()
        .enumerate()
        .map(|(k, m)| (*m, PALETTE[k % PALETTE.len()]))
        .collect();
    frame.legend(&mut svg, &legend);
    svg.push_str("</svg>\n");
    Ok((svg, csv))
}

/// One named series of a time-series overlay.
pub struct Series<'a> {
    pub name: &'a str,
    pub values: Vec<f64>,
}

/// Overlay of several series sharing one time axis. Returns (svg, csv).
pub fn timeseries_report(
    time: &[f64],
    series: &[Series<'_>],
    title: &str,
    y_label: &str,
    hash: &str,
    width: u32,
    height: u32,
) -> Result<(String, String)> {
    if time.is_empty() || series.is_empty() {
        return Err(Error::Validation("time-series report needs samples and at least one series".into()));
    }
    if series.iter().any(|s| s.values.len() != time.len()) {
        return Err(Error::Validation("every series must have one value per time sample".into()));
    }
    let frame = Frame::new(
        width,
        height,
        extent(time.iter().copied()),
        extent(series.iter().flat_map(|s| s.values.iter().copied())),
    );
    let mut svg = String::new();
    frame.open(&mut svg, hash, title, "time [s]", y_label);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        for (i, (t, v)) in time.iter().zip(&s.values).enumerate() {
            let _ = write!(path, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, frame.px(*t), frame.py(*v));
        }
        let _ = writeln!(svg, "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>");
    }
    let legend: Vec<(&str, &str)> = series
        .iter()
        .enumerate()
        .map(|(k, s)| (s.name, PALETTE[k % PALETTE.len()]))
        .collect();
    frame.legend(&mut svg, &legend);
    svg.push_str("</svg>\n");

    let mut csv = super::output::csv_header(hash);
    csv.push_str("time_s");
    for s in series {
        let _ = write!(csv, ",{}", s.name);
    }
    csv.push('\n');
    for (i, t) in time.iter().enumerate() {
        let _ = write!(csv, "{t}");
        for s in series {
            let _ = write!(csv, ",{}", s.values[i]);
        }
        csv.push('\n');
    }
    Ok((svg, csv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_search::{rows, sweep, ParamRange, SweepConfig};
    use crate::flexure::MaterialLibrary;

    fn small_rows(steps: usize) -> Vec<SweepRow> {
        let thickness = if steps == 1 {
            ParamRange::fixed(3e-3)
        } else {
            ParamRange {
                min: 2e-3,
                max: 4e-3,
                steps,
            }
        };
        let mut c = SweepConfig::bundled();
        c.parallelism = Some(1);
        c.materials = vec!["abs".into(), "steel".into()];
        c.magnet_diameter = ParamRange::fixed(3e-3);
        c.magnet_length = ParamRange::fixed(3e-3);
        c.beam_length = ParamRange::fixed(45e-3);
        c.beam_thickness = thickness;
        rows(&sweep(&c, &MaterialLibrary::bundled()).unwrap())
    }

    #[test]
    fn single_point_gives_one_marker() {
        let mut r = small_rows(1);
        r.retain(|x| x.material == "steel");
        r[0].feasible = true;
        let (svg, csv) = sweep_report(&r[..1], "h", 400, 300).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("<!-- manifest: h -->"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn plotted_points_equal_input_metrics() {
        let r = small_rows(5);
        let (_, csv) = sweep_report(&r, "h", 400, 300).unwrap();
        let feasible: Vec<&SweepRow> = r.iter().filter(|x| x.feasible).collect();
        for (line, row) in csv.lines().skip(2).zip(&feasible) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[0].parse::<usize>().unwrap(), row.index);
            assert_eq!(cols[2].parse::<f64>().unwrap(), row.range_fx_n.min(row.range_fz_n));
            assert_eq!(cols[3].parse::<f64>().unwrap(), row.sensitivity_fx_g_per_n);
        }
        assert_eq!(csv.lines().count() - 2, feasible.len());
    }

    #[test]
    fn material_clusters_are_coloured_separately() {
        let r = small_rows(5);
        let (svg, _) = sweep_report(&r, "h", 400, 300).unwrap();
        let materials: std::collections::BTreeSet<&str> =
            r.iter().filter(|x| x.feasible).map(|x| x.material.as_str()).collect();
        assert_eq!(materials.len(), 2);
        assert!(svg.contains(PALETTE[0]) && svg.contains(PALETTE[1]));
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(sweep_report(&[], "h", 400, 300).is_err());
        assert!(timeseries_report(&[], &[], "t", "y", "h", 400, 300).is_err());
    }

    #[test]
    fn timeseries_is_deterministic() {
        let t = vec![0.0, 0.1, 0.2];
        let mk = || {
            vec![
                Series {
                    name: "truth",
                    values: vec![1.0, 2.0, 3.0],
                },
                Series {
                    name: "model",
                    values: vec![1.1, 1.9, 3.2],
                },
            ]
        };
        let a = timeseries_report(&t, &mk(), "F_z", "N", "h", 400, 300).unwrap();
        let b = timeseries_report(&t, &mk(), "F_z", "N", "h", 400, 300).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.matches("stroke-width=\"1.2\"").count(), 2);
    }
}
