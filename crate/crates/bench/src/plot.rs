//! Minimal SVG line charts of convergence traces and Lipschitz sweeps.

use crate::error::{BenchError, Result};
use crate::output::LIPSCHITZ_FILE;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Offset added to `F_k − F*` so the best run stays finite on a log axis.
pub const SUBOPTIMALITY_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Convergence,
    Lipschitz,
}

impl std::str::FromStr for PlotKind {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(Self::Convergence),
            "lipschitz" => Ok(Self::Lipschitz),
            other => Err(BenchError::Config(format!("unknown plot kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Reads the named columns of a CSV file as floats; empty cells become NaN.
pub fn read_columns(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => BenchError::io(path, io),
        kind => BenchError::Plot(format!("{}: {kind:?}", path.display())),
    })?;
    let header = r.headers()?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            header.iter().position(|h| h == *c).ok_or_else(|| BenchError::MissingColumn {
                path: path.to_path_buf(),
                column: c.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for row in r.records() {
        let row = row?;
        for (col, &i) in out.iter_mut().zip(&idx) {
            let cell = row.get(i).unwrap_or("");
            let v = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse()
                    .map_err(|_| BenchError::Plot(format!("{}: `{cell}` is not a number", path.display())))?
            };
            col.push(v);
        }
    }
    if out[0].is_empty() {
        return Err(BenchError::Plot(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

/// `trace_{arm}_{lambda}.csv` files in `dir`, sorted by name, with their arm and λ labels.
fn trace_files(dir: &Path) -> Result<Vec<(PathBuf, String, String)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| BenchError::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name.strip_prefix("trace_").and_then(|n| n.strip_suffix(".csv")) else {
            continue;
        };
        if let Some((arm, lambda)) = stem.rsplit_once('_') {
            found.push((path.clone(), arm.to_string(), lambda.to_string()));
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(BenchError::Plot(format!("{}: no trace_*.csv files", dir.display())));
    }
    Ok(found)
}

/// One series per trace: `log10(F_k − F*_λ + 1e-15)` against `k`, where `F*_λ`
/// is the best objective over all traces sharing that λ.
pub fn convergence_series(dir: &Path) -> Result<Vec<Series>> {
    let mut traces = Vec::new();
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for (path, arm, lambda) in trace_files(dir)? {
        let cols = read_columns(&path, &["k", "objective"])?;
        let fmin = cols[1].iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
        let b = best.entry(lambda.clone()).or_insert(f64::INFINITY);
        *b = b.min(fmin);
        traces.push((format!("{arm} λ={lambda}"), lambda, cols));
    }
    Ok(traces
        .into_iter()
        .map(|(label, lambda, cols)| {
            let fstar = best[&lambda];
            let points = cols[0]
                .iter()
                .zip(&cols[1])
                .filter(|(_, f)| f.is_finite())
                .map(|(&k, &f)| (k, (f - fstar + SUBOPTIMALITY_FLOOR).log10()))
                .collect();
            Series { label, points }
        })
        .collect())
}

/// `log10(estimate)` against `log10(λ)` from `lipschitz.csv`; failed rows are skipped.
pub fn lipschitz_series(dir: &Path) -> Result<Series> {
    let path = dir.join(LIPSCHITZ_FILE);
    let cols = read_columns(&path, &["lambda", "estimate"])?;
    let points: Vec<(f64, f64)> = cols[0]
        .iter()
        .zip(&cols[1])
        .filter(|(l, e)| **l > 0.0 && **e > 0.0)
        .map(|(l, e)| (l.log10(), e.log10()))
        .collect();
    if points.is_empty() {
        return Err(BenchError::Plot(format!("{}: no positive estimates", path.display())));
    }
    Ok(Series {
        label: "estimate".into(),
        points,
    })
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Renders the series as polylines with labelled axes. `scale` names the axis
/// transform (`linear-log10` or `log10-log10`) on the root element.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, scale: &str, series: &[Series]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" data-scale="{scale}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(s, r#"<line class="axis" x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line class="axis" x1="{l}" y1="{b}" x2="{l}" y2="{t}" stroke="black"/>"#);
    for (v, x) in [(x0, l), (x1, r)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="11">{v:.3}</text>"#, b + 16.0);
    }
    for (v, y) in [(y0, b), (y1, t)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" font-size="11">{v:.3}</text>"#, l - 6.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&ser.label)
        );
        let ly = t + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
            r - 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one SVG from the CSV files in `in_dir` and writes it to `out`.
pub fn render_plot(kind: PlotKind, in_dir: &Path, out: &Path) -> Result<()> {
    let svg = match kind {
        PlotKind::Convergence => render_svg(
            "Convergence",
            "outer iteration k",
            "log10(F_k - F*)",
            "linear-log10",
            &convergence_series(in_dir)?,
        ),
        PlotKind::Lipschitz => render_svg(
            "Lipschitz estimate",
            "log10(lambda)",
            "log10(L)",
            "log10-log10",
            &[lipschitz_series(in_dir)?],
        ),
    };
    std::fs::write(out, svg).map_err(|e| BenchError::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        std::fs::write(dir.join(name), text).unwrap();
    }

    #[test]
    fn suboptimality_uses_best_per_lambda() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "trace_projected_1e3.csv", "k,objective\n1,3.0\n2,1.0\n");
        write(d.path(), "trace_joint_1e3.csv", "k,objective\n1,3.0\n2,2.0\n");
        write(d.path(), "trace_joint_1e5.csv", "k,objective\n1,50.0\n2,40.0\n");
        write(d.path(), "summary.csv", "lambda\n1.0\n");
        let s = convergence_series(d.path()).unwrap();
        assert_eq!(s.len(), 3);
        let joint3 = s.iter().find(|x| x.label == "joint λ=1e3").unwrap();
        assert!((joint3.points[1].1 - 0.0).abs() < 1e-12);
        let proj = s.iter().find(|x| x.label == "projected λ=1e3").unwrap();
        assert!((proj.points[1].1 + 15.0).abs() < 1e-9);
        let j5 = s.iter().find(|x| x.label == "joint λ=1e5").unwrap();
        assert!((j5.points[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_trace_and_missing_column_are_errors() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "trace_projected_1e3.csv", "k,objective\n");
        assert!(matches!(convergence_series(d.path()), Err(BenchError::Plot(_))));
        write(d.path(), "trace_projected_1e3.csv", "k,grad_norm\n1,2.0\n");
        match convergence_series(d.path()) {
            Err(e @ BenchError::MissingColumn { .. }) => assert!(e.to_string().contains("objective")),
            other => panic!("{other:?}"),
        }
        let empty = tempfile::tempdir().unwrap();
        assert!(convergence_series(empty.path()).is_err());
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let series: Vec<Series> = (0..3)
            .map(|i| Series {
                label: format!("s{i}"),
                points: vec![(1.0, i as f64), (2.0, 0.5), (3.0, f64::NAN)],
            })
            .collect();
        let svg = render_svg("t", "x", "y", "linear-log10", &series);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn lipschitz_skips_failed_rows() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), LIPSCHITZ_FILE, "lambda,estimate,status\n10.0,2.0,ok\n100.0,,failed: x\n1000.0,20.0,ok\n");
        let s = lipschitz_series(d.path()).unwrap();
        assert_eq!(s.points, vec![(1.0, 2f64.log10()), (3.0, 20f64.log10())]);
    }
}
