//! SVG plots of one trace column against the round index.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::runner::trace::{read_trace, TraceTable};

const COLORS: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(23, 190, 207),
];

/// One labelled series of positive `(k, value)` points.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Loads `field` from each trace. All traces must share the first trace's
/// header. Non-positive values are dropped since both axes are logarithmic.
pub fn load_series(traces: &[PathBuf], field: &str) -> Result<Vec<Series>> {
    let tables: Vec<(PathBuf, TraceTable)> =
        traces.iter().map(|p| read_trace(p).map(|t| (p.clone(), t))).collect::<Result<_>>()?;
    let (first_path, first) = tables.first().ok_or_else(|| Error::InvalidParameter("no traces to plot".into()))?;
    let mut out = Vec::with_capacity(tables.len());
    for (path, t) in &tables {
        if t.header != first.header {
            return Err(Error::InvalidInput(format!(
                "{} has a different header from {}",
                path.display(),
                first_path.display()
            )));
        }
        let ks = t.column("k").ok_or_else(|| Error::InvalidInput(format!("{} has no `k` column", path.display())))?;
        let ys = t.column(field).ok_or_else(|| {
            Error::InvalidParameter(format!("unknown field `{field}` (columns: {})", first.header.join(", ")))
        })?;
        let points = ks.into_iter().zip(ys).filter(|&(k, y)| k > 0.0 && y > 0.0 && y.is_finite()).collect();
        let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        out.push(Series { label, points });
    }
    Ok(out)
}

fn draw_err<E: std::fmt::Debug>(path: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::InvalidState(format!("drawing {}: {e:?}", path.display()))
}

/// Writes a log-log SVG of `field` for each trace.
pub fn plot_traces(traces: &[PathBuf], field: &str, out: &Path) -> Result<()> {
    let series = load_series(traces, field)?;
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut k_hi, mut y_lo, mut y_hi) = (1.0f64, f64::INFINITY, 0.0f64);
    for &(k, y) in all {
        k_hi = k_hi.max(k);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if y_hi <= 0.0 {
        return Err(Error::InvalidInput(format!("field `{field}` has no positive values to plot")));
    }
    if y_lo >= y_hi {
        y_lo = y_hi / 10.0;
    }
    let k_hi = if k_hi <= 1.0 { 10.0 } else { k_hi };

    let err = draw_err(out);
    let root = SVGBackend::new(out, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((1.0..k_hi).log_scale(), (y_lo..y_hi).log_scale())
        .map_err(&err)?;
    chart.configure_mesh().x_desc("k").y_desc(field).draw().map_err(&err)?;
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(&err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)?;
    Ok(())
}
