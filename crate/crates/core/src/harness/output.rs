use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::StressReport;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;
use crate::protocol::{ProtocolConfig, SweepRecord};

pub const CSV_HEADER: &str =
    "tau_ns,d_eps_uV,concurrence,fidelity,entropy_kB,entropy_rate_kB_per_ns,purity,min_eigenvalue";

/// What a CSV file is written from.
#[derive(Clone, Copy, Debug)]
pub enum CsvSource<'a> {
    Records(&'a [SweepRecord]),
    /// Rows at each stored sample; the time goes in the `tau_ns` column.
    Trajectory {
        trajectory: &'a Trajectory,
        cfg: &'a ProtocolConfig,
    },
    /// Per-sample rows of every case in case order, preceded by a comment
    /// line naming the random stream.
    Stress(&'a StressReport),
}

/// Metrics at each stored sample of `trajectory`, with entropy rates taken
/// along the free-evolution equation of motion of `cfg`.
pub fn trajectory_records(
    trajectory: &Trajectory,
    cfg: &ProtocolConfig,
) -> Result<Vec<SweepRecord>> {
    let h = cfg.evolution_hamiltonian();
    trajectory
        .samples()
        .map(|(tau, rho)| {
            Ok(SweepRecord {
                tau,
                d_eps: cfg.params.d_eps,
                metrics: MetricsRecord::evaluate(rho, cfg.dynamics, &h, &cfg.params)?,
            })
        })
        .collect()
}

/// Writes header and rows with 12 significant digits and LF line ends. Rows
/// are range-checked before anything is written.
pub fn write_csv<W: Write>(
    out: &mut W,
    records: &[SweepRecord],
    comment: Option<&str>,
) -> Result<()> {
    let mut text = String::with_capacity(128 * (records.len() + 2));
    if let Some(c) = comment {
        text.push_str("# ");
        text.push_str(c);
        text.push('\n');
    }
    text.push_str(CSV_HEADER);
    text.push('\n');
    for r in records {
        r.metrics.check_invariants()?;
        let m = &r.metrics;
        let fields = [
            r.tau,
            r.d_eps,
            m.concurrence,
            m.fidelity,
            m.entropy,
            m.entropy_rate,
            m.purity,
            m.min_eigenvalue,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvariantViolation(format!(
                "non-finite field in row at tau = {}",
                r.tau
            )));
        }
        for (k, x) in fields.iter().enumerate() {
            if k > 0 {
                text.push(',');
            }
            write!(text, "{x:.11e}").unwrap();
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn emit_csv(source: CsvSource<'_>, path: &Path) -> Result<()> {
    let (records, comment) = match source {
        CsvSource::Records(r) => (r.to_vec(), None),
        CsvSource::Trajectory { trajectory, cfg } => (trajectory_records(trajectory, cfg)?, None),
        CsvSource::Stress(report) => (report.records(), report.provenance()),
    };
    let mut buf = Vec::new();
    write_csv(&mut buf, &records, comment.as_deref())?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Static line plots.
#[derive(Clone, Copy, Debug)]
pub enum Plot<'a> {
    /// Fidelity against τ, one line per detuning, with the separability bound.
    Fidelity(&'a [SweepRecord]),
    /// S/k_B and its rate against τ in two stacked panels.
    Entropy(&'a [SweepRecord]),
    /// Every eigenvalue of every stress case against time.
    EigenvalueFan(&'a StressReport),
}

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
/// Points kept per polyline of the eigenvalue fan.
const FAN_POINTS: usize = 200;

struct Panel {
    top: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn new(top: f64, xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64>) -> Self {
        Panel {
            top,
            x: extent(xs, 0.0),
            y: extent(ys, 0.05),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + PANEL_HEIGHT
            - MARGIN_BOTTOM
            - (y - self.y.0) / (self.y.1 - self.y.0) * (PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn include(&mut self, y: f64) {
        if y < self.y.0 || y > self.y.1 {
            self.y = (self.y.0.min(y), self.y.1.max(y));
            let pad = 0.05 * (self.y.1 - self.y.0);
            self.y = (self.y.0 - pad, self.y.1 + pad);
        }
    }

    fn axes(&self, svg: &mut String, xlabel: &str, ylabel: &str) {
        let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
        let (top, bottom) = (
            self.top + MARGIN_TOP,
            self.top + PANEL_HEIGHT - MARGIN_BOTTOM,
        );
        writeln!(
            svg,
            r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            right - left,
            bottom - top
        )
        .unwrap();
        for t in ticks(self.x) {
            let x = self.px(t);
            writeln!(
                svg,
                r#"<line x1="{x:.1}" y1="{bottom}" x2="{x:.1}" y2="{}" stroke="black"/>"#,
                bottom + 5.0
            )
            .unwrap();
            writeln!(
                svg,
                r#"<text x="{x:.1}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
                bottom + 18.0,
                tick_label(t, self.x)
            )
            .unwrap();
        }
        for t in ticks(self.y) {
            let y = self.py(t);
            writeln!(
                svg,
                r#"<line x1="{}" y1="{y:.1}" x2="{left}" y2="{y:.1}" stroke="black"/>"#,
                left - 5.0
            )
            .unwrap();
            writeln!(
                svg,
                r#"<text x="{}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
                left - 8.0,
                y + 4.0,
                tick_label(t, self.y)
            )
            .unwrap();
        }
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{xlabel}</text>"#,
            0.5 * (left + right),
            bottom + 38.0
        )
        .unwrap();
        let cy = 0.5 * (top + bottom);
        writeln!(svg, r#"<text x="18" y="{cy}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {cy})">{ylabel}</text>"#)
            .unwrap();
    }

    fn polyline(
        &self,
        svg: &mut String,
        pts: impl Iterator<Item = (f64, f64)>,
        color: &str,
        width: f64,
    ) {
        svg.push_str(r#"<polyline fill="none" stroke=""#);
        svg.push_str(color);
        write!(svg, r#"" stroke-width="{width}" points=""#).unwrap();
        for (x, y) in pts {
            write!(svg, "{:.1},{:.1} ", self.px(x), self.py(y)).unwrap();
        }
        svg.push_str("\"/>\n");
    }

    fn hline(&self, svg: &mut String, y: f64, label: &str) {
        let py = self.py(y);
        writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#555" stroke-dasharray="6,4"/>"##,
            WIDTH - MARGIN_RIGHT
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" font-size="11">{label}</text>"#,
            WIDTH - MARGIN_RIGHT + 6.0,
            py + 4.0
        )
        .unwrap();
    }

    fn legend(&self, svg: &mut String, row: usize, color: &str, label: &str) {
        let y = self.top + MARGIN_TOP + 14.0 + 16.0 * row as f64;
        let x = WIDTH - MARGIN_RIGHT + 6.0;
        writeln!(
            svg,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
            x + 18.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11">{label}</text>"#,
            x + 22.0,
            y + 4.0
        )
        .unwrap();
    }
}

fn extent(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 * lo.abs().max(1.0) {
        let half = 0.5 * lo.abs().max(1.0);
        return (lo - half, hi + half);
    }
    (lo - pad * span, hi + pad * span)
}

fn tick_step(range: (f64, f64)) -> f64 {
    let raw = (range.1 - range.0) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    mag * if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn ticks(range: (f64, f64)) -> Vec<f64> {
    let step = tick_step(range);
    let first = (range.0 / step).ceil() as i64;
    let last = (range.1 / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64, range: (f64, f64)) -> String {
    let step = tick_step(range);
    let v = if v.abs() < 1e-9 * step { 0.0 } else { v };
    let mag = v.abs().max(step);
    if !(1e-3..1e5).contains(&mag) {
        format!("{v:.1e}")
    } else {
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        format!("{v:.decimals$}")
    }
}

/// Records grouped by detuning, in order of first appearance.
fn by_detuning(records: &[SweepRecord]) -> Vec<(f64, Vec<&SweepRecord>)> {
    let mut groups: Vec<(f64, Vec<&SweepRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(d, _)| *d == r.d_eps) {
            Some((_, g)) => g.push(r),
            None => groups.push((r.d_eps, vec![r])),
        }
    }
    groups
}

fn svg_document(height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn line_panel(
    svg: &mut String,
    top: f64,
    groups: &[(f64, Vec<&SweepRecord>)],
    value: impl Fn(&SweepRecord) -> f64,
    ylabel: &str,
) -> Panel {
    let all = groups.iter().flat_map(|(_, g)| g.iter().copied());
    let panel = Panel::new(top, all.clone().map(|r| r.tau), all.map(&value));
    panel.axes(svg, "tau_ns", ylabel);
    for (k, (d, g)) in groups.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        panel.polyline(svg, g.iter().map(|r| (r.tau, value(r))), color, 1.5);
        panel.legend(svg, k, color, &format!("{d} uV"));
    }
    panel
}

impl Plot<'_> {
    pub fn render(&self) -> Result<String> {
        let mut svg = String::new();
        let height = match self {
            Plot::Fidelity(records) => {
                if records.is_empty() {
                    return Err(Error::invalid("nothing to plot"));
                }
                let groups = by_detuning(records);
                let all = groups.iter().flat_map(|(_, g)| g.iter().copied());
                let mut panel = Panel::new(
                    0.0,
                    all.clone().map(|r| r.tau),
                    all.map(|r| r.metrics.fidelity),
                );
                panel.include(0.5);
                panel.axes(&mut svg, "tau_ns", "fidelity");
                panel.hline(&mut svg, 0.5, "F = 0.5");
                for (k, (d, g)) in groups.iter().enumerate() {
                    let color = COLORS[k % COLORS.len()];
                    panel.polyline(
                        &mut svg,
                        g.iter().map(|r| (r.tau, r.metrics.fidelity)),
                        color,
                        1.5,
                    );
                    panel.legend(&mut svg, k + 1, color, &format!("{d} uV"));
                }
                PANEL_HEIGHT
            }
            Plot::Entropy(records) => {
                if records.is_empty() {
                    return Err(Error::invalid("nothing to plot"));
                }
                let groups = by_detuning(records);
                line_panel(&mut svg, 0.0, &groups, |r| r.metrics.entropy, "entropy_kB");
                line_panel(
                    &mut svg,
                    PANEL_HEIGHT,
                    &groups,
                    |r| r.metrics.entropy_rate,
                    "entropy_rate_kB_per_ns",
                );
                2.0 * PANEL_HEIGHT
            }
            Plot::EigenvalueFan(report) => {
                let cases: Vec<_> = report
                    .cases
                    .iter()
                    .filter(|c| !c.times.is_empty())
                    .collect();
                if cases.is_empty() {
                    return Err(Error::invalid("nothing to plot"));
                }
                let xs = cases.iter().flat_map(|c| c.times.iter().copied());
                let ys = cases
                    .iter()
                    .flat_map(|c| c.eigenvalues.iter().flatten().copied());
                let mut panel = Panel::new(0.0, xs, ys);
                panel.include(0.0);
                panel.axes(&mut svg, "t_ns", "eigenvalue");
                for c in &cases {
                    let stride = c.times.len().div_ceil(FAN_POINTS).max(1);
                    for (j, color) in COLORS.iter().take(4).enumerate() {
                        let pts = c.times.iter().zip(&c.eigenvalues).enumerate().filter_map(
                            |(k, (t, ev))| {
                                (k % stride == 0 || k + 1 == c.times.len()).then_some((*t, ev[j]))
                            },
                        );
                        panel.polyline(&mut svg, pts, color, 0.5);
                    }
                }
                panel.hline(&mut svg, 0.0, "0");
                PANEL_HEIGHT
            }
        };
        Ok(svg_document(height, &svg))
    }
}

pub fn emit_plot(plot: &Plot<'_>, path: &Path) -> Result<()> {
    std::fs::write(path, plot.render()?)?;
    Ok(())
}
