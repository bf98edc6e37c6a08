use std::fmt::Write as _;

use cdc_core::twin::TwinTrace;
use clap::ValueEnum;

use crate::error::{CliError, Result};
use crate::report::{is_oracle, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Lcurve,
    Sweep,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 40.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Maps data coordinates onto the plot area.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let widen = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let (x0, x1) = widen(x0, x1);
        let (y0, y1) = widen(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    pub fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    pub fn y(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

struct Line {
    name: String,
    points: Vec<(f64, f64)>,
}

fn render(frame: &Frame, lines: &[Line], x_label: &str, x_ticks: &[(f64, String)], marker: Option<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (bx, by, ty, rx) = (LEFT, HEIGHT - BOTTOM, TOP, WIDTH - RIGHT);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{bx},{ty} L{bx},{by} L{rx},{by}" fill="none" stroke="black"/>"#
    );
    for (v, label) in x_ticks {
        let x = frame.x(*v);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{label}</text>"#,
            by + 15.0
        );
    }
    for k in 0..=4 {
        let v = frame.y0 + (frame.y1 - frame.y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.2}</text>"#,
            bx - 5.0,
            frame.y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{x_label}</text>"#,
        (bx + rx) / 2.0,
        HEIGHT - 5.0
    );
    for (i, line) in lines.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = line
            .points
            .iter()
            .map(|&(x, y)| format!("{:.3},{:.3}", frame.x(x), frame.y(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-name="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            escape(&line.name),
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{color}">{}</text>"#,
            rx + 10.0,
            ty + 15.0 * (i as f64 + 1.0),
            escape(&line.name)
        );
    }
    if let Some(m) = marker {
        let x = frame.x(m);
        let _ = writeln!(
            s,
            r#"<line class="stop-marker" x1="{x:.3}" y1="{ty}" x2="{x:.3}" y2="{by}" stroke="black" stroke-dasharray="4,3"/>"#
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn epoch_ticks(t: usize) -> Vec<(f64, String)> {
    let step = (t / 5).max(1);
    (1..=t).filter(|e| e % step == 0 || *e == 1).map(|e| (e as f64, e.to_string())).collect()
}

/// Frame used for a trace of `epochs` epochs with values up to `ymax`.
pub fn lcurve_frame(epochs: usize, ymax: f64) -> Frame {
    Frame::new(1.0, epochs as f64, 0.0, ymax.max(1.0))
}

/// Distance and metric series against epoch, with an optional stop marker.
pub fn lcurve_svg(trace: &TwinTrace, stop_epoch: Option<usize>) -> Result<String> {
    if trace.is_empty() {
        return Err(CliError::Input("cannot plot an empty trace".into()));
    }
    let epochs = |v: Vec<f64>| -> Vec<(f64, f64)> {
        v.into_iter().enumerate().map(|(i, y)| ((i + 1) as f64, y)).collect()
    };
    let mut lines = vec![
        Line {
            name: "weight cosine distance".into(),
            points: epochs(trace.weight_cosdist()),
        },
        Line {
            name: "prediction cosine distance".into(),
            points: epochs(trace.pred_cosdist()),
        },
    ];
    let cf = trace.cf_samples();
    if !cf.is_empty() {
        lines.push(Line {
            name: "counterfactual distance".into(),
            points: cf.iter().map(|&(e, d, _)| (e as f64, d)).collect(),
        });
    }
    lines.push(Line {
        name: "test metric".into(),
        points: epochs(trace.eval_metric()),
    });
    let ymax = lines
        .iter()
        .flat_map(|l| l.points.iter().map(|p| p.1))
        .fold(1.0f64, f64::max);
    let frame = lcurve_frame(trace.len(), ymax);
    Ok(render(
        &frame,
        &lines,
        "epoch",
        &epoch_ticks(trace.len()),
        stop_epoch.map(|e| e as f64),
    ))
}

/// Mean test metric against log learning rate, one line per method.
pub fn sweep_svg(rows: &[SweepRow]) -> Result<String> {
    let methods: Vec<&str> = rows.iter().fold(Vec::new(), |mut acc, r| {
        if !acc.contains(&r.method.as_str()) {
            acc.push(r.method.as_str());
        }
        acc
    });
    if methods.is_empty() {
        return Err(CliError::Input("cannot plot a sweep with no methods".into()));
    }
    if let Some(r) = rows.iter().find(|r| !(r.learning_rate > 0.0)) {
        return Err(CliError::Input(format!(
            "learning rate {} cannot be placed on a log axis",
            r.learning_rate
        )));
    }
    let mut lrs: Vec<f64> = rows.iter().map(|r| r.learning_rate).collect();
    lrs.sort_by(f64::total_cmp);
    lrs.dedup();
    let mut lines = Vec::new();
    for m in methods {
        let points = lrs
            .iter()
            .filter_map(|&lr| {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.method == m && r.learning_rate == lr)
                    .map(|r| r.test_metric)
                    .collect();
                (!v.is_empty()).then(|| (lr.log10(), v.iter().sum::<f64>() / v.len() as f64))
            })
            .collect();
        let name = if is_oracle(m) { format!("{m} (reference)") } else { m.to_string() };
        lines.push(Line { name, points });
    }
    let ys = rows.iter().map(|r| r.test_metric);
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let frame = Frame::new(lrs[0].log10(), lrs[lrs.len() - 1].log10(), lo.min(0.0), hi.max(1.0));
    let ticks: Vec<(f64, String)> = lrs.iter().map(|&lr| (lr.log10(), format!("{lr}"))).collect();
    Ok(render(&frame, &lines, "learning rate", &ticks, None))
}
