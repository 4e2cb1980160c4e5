use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sequence::EvalMatrix;
use super::train::Strategy;
use crate::error::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Below this magnitude an average forgetting counts as zero.
const ZERO_FORGETTING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskScore {
    pub testset_id: String,
    pub value_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneComparison {
    pub drops: Vec<TaskScore>,
    pub average_forgetting: f64,
    /// Previous test sets on which this run dropped strictly less.
    pub smaller_drops: usize,
    /// Difference to finetune on the last task's test set.
    pub final_task_gap_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgettingReport {
    pub format_version: u32,
    pub strategy: Strategy,
    /// `score(M_t on E_t) − score(M_last on E_t)` for every `t` before the last.
    pub drops: Vec<TaskScore>,
    pub average_forgetting: f64,
    /// `score(M_t on E_t) − score(M_0 on E_t)` for every `t ≥ 1`.
    pub adaptation_gain: Vec<TaskScore>,
    /// Ratio of average forgetting to finetune's; `None` when no comparison
    /// was given or finetune did not forget on average.
    pub relative_forgetting_vs_finetune: Option<f64>,
    pub finetune: Option<FinetuneComparison>,
}

fn drops(m: &EvalMatrix) -> Result<Vec<TaskScore>> {
    let last = m.model_ids.len() - 1;
    (0..last)
        .map(|t| {
            Ok(TaskScore {
                testset_id: m.testset_ids[t].clone(),
                value_db: m.require(t, t)? - m.require(last, t)?,
            })
        })
        .collect()
}

fn check_grid(m: &EvalMatrix) -> Result<()> {
    if m.model_ids.is_empty() || m.model_ids.len() != m.testset_ids.len() {
        return Err(Error::Config(format!(
            "forgetting needs a square matrix, got {} models × {} test sets",
            m.model_ids.len(),
            m.testset_ids.len()
        )));
    }
    for i in 0..m.model_ids.len() {
        for j in 0..m.testset_ids.len() {
            m.require(i, j)?;
        }
    }
    Ok(())
}

fn mean(v: &[TaskScore]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|d| d.value_db).sum::<f64>() / v.len() as f64
    }
}

/// Forgetting statistics of a complete, square matrix, optionally compared
/// against a finetune run on the same grid.
pub fn compute_forgetting(
    matrix: &EvalMatrix,
    finetune: Option<&EvalMatrix>,
) -> Result<ForgettingReport> {
    check_grid(matrix)?;
    let own = drops(matrix)?;
    let average_forgetting = mean(&own);
    let adaptation_gain = (1..matrix.model_ids.len())
        .map(|t| {
            Ok(TaskScore {
                testset_id: matrix.testset_ids[t].clone(),
                value_db: matrix.require(t, t)? - matrix.require(0, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (relative, comparison) = match finetune {
        None => (None, None),
        Some(ft) => {
            check_grid(ft)?;
            if ft.model_ids.len() != matrix.model_ids.len() {
                return Err(Error::Config("matrices cover different grids".into()));
            }
            let ft_drops = drops(ft)?;
            let ft_avg = mean(&ft_drops);
            let smaller = own
                .iter()
                .zip(&ft_drops)
                .filter(|(a, b)| a.value_db < b.value_db)
                .count();
            let last = matrix.model_ids.len() - 1;
            let gap = matrix.require(last, last)? - ft.require(last, last)?;
            let rel = (ft_avg.abs() > ZERO_FORGETTING).then(|| average_forgetting / ft_avg);
            (
                rel,
                Some(FinetuneComparison {
                    drops: ft_drops,
                    average_forgetting: ft_avg,
                    smaller_drops: smaller,
                    final_task_gap_db: gap,
                }),
            )
        }
    };
    Ok(ForgettingReport {
        format_version: REPORT_FORMAT_VERSION,
        strategy: matrix.strategy,
        drops: own,
        average_forgetting,
        adaptation_gain,
        relative_forgetting_vs_finetune: relative,
        finetune: comparison,
    })
}

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    dashed: bool,
    values: Vec<f64>,
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of one test set's score across models.
fn chart_svg(title: &str, model_ids: &[String], series: &[Series]) -> String {
    let finite = series.iter().flat_map(|s| s.values.iter()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.1).max(0.5);
    lo -= pad;
    hi += pad;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let n = model_ids.len().max(2);
    let x = |i: usize| LEFT + plot_w * i as f64 / (n - 1) as f64;
    let y = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT} {TOP} V{} H{}" stroke="black" fill="none"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{:.2}" y1="{yy:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y(v) + 4.0,
            yy = y(v)
        );
    }
    for (i, id) in model_ids.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x(i),
            TOP + plot_h + 16.0,
            xml_escape(id)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">SDR^STSA (dB)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (k, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v)))
            .collect();
        let dash = if ser.dashed { r#" stroke-dasharray="5 3""# } else { "" };
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
                pts.join(" "),
                ser.color
            );
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            ser.color,
            lx + 26.0,
            ly + 4.0,
            xml_escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn column(m: &EvalMatrix, j: usize) -> Vec<f64> {
    (0..m.model_ids.len())
        .map(|i| m.get(i, j).unwrap_or(f64::NAN))
        .collect()
}

/// Writes `matrix.csv`, `matrix.json`, `report.json` and one SVG chart per
/// test set into `out_dir`. Output depends only on the inputs.
pub fn emit_report(
    matrix: &EvalMatrix,
    report: Option<&ForgettingReport>,
    finetune: Option<&EvalMatrix>,
    out_dir: impl AsRef<Path>,
) -> Result<()> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("matrix.csv"), matrix.to_csv())?;
    matrix.save_json(out_dir.join("matrix.json"))?;
    if let Some(r) = report {
        let mut text = serde_json::to_string_pretty(r)?;
        text.push('\n');
        std::fs::write(out_dir.join("report.json"), text)?;
    }
    let n = matrix.model_ids.len();
    for (j, tid) in matrix.testset_ids.iter().enumerate() {
        let m0 = matrix.get(0, j).unwrap_or(f64::NAN);
        let mut series = vec![
            Series {
                label: "noisy",
                color: "#888888",
                dashed: true,
                values: vec![matrix.noisy.get(j).copied().unwrap_or(f64::NAN); n],
            },
            Series {
                label: "baseline M0",
                color: "#2b6cb0",
                dashed: true,
                values: vec![m0; n],
            },
        ];
        if let Some(ft) = finetune {
            series.push(Series {
                label: "finetune",
                color: "#dd6b20",
                dashed: false,
                values: column(ft, j),
            });
        }
        if finetune.is_none() || matrix.strategy != Strategy::Finetune {
            series.push(Series {
                label: matrix.strategy.name(),
                color: if matrix.strategy == Strategy::Finetune { "#dd6b20" } else { "#2f855a" },
                dashed: false,
                values: column(matrix, j),
            });
        }
        std::fs::write(
            out_dir.join(format!("{tid}.svg")),
            chart_svg(&format!("Test set {tid}"), &matrix.model_ids, &series),
        )?;
    }
    Ok(())
}
