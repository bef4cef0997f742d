//! SVG figures: the layered activation diagram (grayscale, black = 0,
//! white = 1) and the two-panel loss/accuracy training curves. Output is
//! plain SVG 1.1 with no external references, and byte-deterministic.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GRID_COLS, GRID_ROWS};
use crate::network::ActivationRecord;
use crate::training::{Confidence, Prediction, TrainingHistory};

/// `round(255 * clamp(a, 0, 1))`, halves rounding up.
pub fn gray_level(activation: f64) -> u8 {
    let a = if activation.is_nan() {
        0.0
    } else {
        activation.clamp(0.0, 1.0)
    };
    (255.0 * a + 0.5).floor() as u8
}

pub fn gray_hex(level: u8) -> String {
    format!("#{level:02X}{level:02X}{level:02X}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeatmapStage {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub levels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeatmapData {
    pub stages: Vec<HeatmapStage>,
}

/// Caption used under a diagram, e.g. `checkerboard: 4 (p = 0.85, confident)`.
pub fn prediction_caption(label: &str, prediction: &Prediction) -> String {
    let status = match prediction.status {
        Confidence::Confident => "confident",
        Confidence::Unsure => "unsure",
    };
    format!(
        "{label}: {} (p = {:.2}, {status})",
        prediction.class_name,
        prediction.probability()
    )
}

/// Input stage as a 6x6 grid, every dense stage as a single row.
pub fn activations_to_heatmap(rec: &ActivationRecord) -> HeatmapData {
    HeatmapData {
        stages: rec
            .stages
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let (rows, cols) = if k == 0 {
                    (GRID_ROWS, GRID_COLS)
                } else {
                    (1, s.values.len())
                };
                HeatmapStage {
                    name: s.name.clone(),
                    rows,
                    cols,
                    levels: s.values.iter().map(|&v| gray_level(v)).collect(),
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagramSpec {
    pub cell_size: u32,
    pub layer_gap: u32,
    pub show_arrows: bool,
    pub max_units_rendered: usize,
}

impl Default for DiagramSpec {
    fn default() -> Self {
        DiagramSpec {
            cell_size: 12,
            layer_gap: 36,
            show_arrows: true,
            max_units_rendered: 64,
        }
    }
}

fn escape(text: &str) -> String {
    let mut s = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => s.push_str("&amp;"),
            '<' => s.push_str("&lt;"),
            '>' => s.push_str("&gt;"),
            '"' => s.push_str("&quot;"),
            '\'' => s.push_str("&apos;"),
            c => s.push(c),
        }
    }
    s
}

const MARGIN: u32 = 16;
const LABEL_WIDTH: u32 = 72;
const CAPTION_HEIGHT: u32 = 24;

/// One `<rect>` per unit, input at the bottom and output on top, with an
/// arrow from each layer to the next.
pub fn render_diagram(
    rec: &ActivationRecord,
    spec: &DiagramSpec,
    caption: Option<&str>,
) -> Result<String> {
    if spec.cell_size == 0 || spec.layer_gap == 0 || spec.max_units_rendered == 0 {
        return Err(Error::Render(
            "cell_size, layer_gap and max_units_rendered must be positive".into(),
        ));
    }
    let heat = activations_to_heatmap(rec);
    for st in &heat.stages {
        if st.levels.len() > spec.max_units_rendered {
            return Err(Error::Render(format!(
                "stage {:?} has {} units, more than max_units_rendered = {}; raise the limit to render it",
                st.name,
                st.levels.len(),
                spec.max_units_rendered
            )));
        }
    }

    let cell = spec.cell_size;
    let widest = heat
        .stages
        .iter()
        .map(|s| s.cols as u32 * cell)
        .max()
        .unwrap_or(0);
    let caption_h = if caption.is_some() { CAPTION_HEIGHT } else { 0 };
    let body_h: u32 = heat
        .stages
        .iter()
        .map(|s| s.rows as u32 * cell)
        .sum::<u32>()
        + spec.layer_gap * (heat.stages.len() as u32).saturating_sub(1);
    let width = 2 * MARGIN + widest + LABEL_WIDTH;
    let height = 2 * MARGIN + caption_h + body_h;

    // (x, y_top, w, h) per stage, index-aligned with the record.
    let mut boxes = vec![(0u32, 0u32, 0u32, 0u32); heat.stages.len()];
    let mut y = MARGIN + caption_h;
    for (k, st) in heat.stages.iter().enumerate().rev() {
        let w = st.cols as u32 * cell;
        let h = st.rows as u32 * cell;
        boxes[k] = (MARGIN + (widest - w) / 2, y, w, h);
        y += h + spec.layer_gap;
    }

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    if spec.show_arrows {
        out.push_str(
            r##"<defs><marker id="arrowhead" markerWidth="8" markerHeight="8" refX="7" refY="4" orient="auto"><path d="M0,0 L8,4 L0,8 z" fill="#404040"/></marker></defs>"##,
        );
        out.push('\n');
    }
    if let Some(text) = caption {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
            width / 2,
            MARGIN + 12,
            escape(text)
        );
    }

    for (k, st) in heat.stages.iter().enumerate() {
        let (x0, y0, w, h) = boxes[k];
        let values = &rec.stages[k].values;
        let _ = writeln!(
            out,
            r#"<g class="stage" data-stage="{}">"#,
            escape(&st.name)
        );
        for (i, &level) in st.levels.iter().enumerate() {
            let (r, c) = ((i / st.cols) as u32, (i % st.cols) as u32);
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{}" stroke="#808080" stroke-width="0.5"><title>{}[{i}] = {:.4}</title></rect>"##,
                x0 + c * cell,
                y0 + r * cell,
                gray_hex(level),
                escape(&st.name),
                values[i]
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            MARGIN + widest + 8,
            y0 + h / 2 + 4,
            escape(&st.name)
        );
        let _ = w;
        out.push_str("</g>\n");
    }

    if spec.show_arrows {
        for k in 0..heat.stages.len().saturating_sub(1) {
            let (lx, ly, lw, _) = boxes[k];
            let (ux, uy, uw, uh) = boxes[k + 1];
            let x_from = lx + lw / 2;
            let x_to = ux + uw / 2;
            let _ = writeln!(
                out,
                r##"<path d="M{x_from},{} L{x_to},{}" stroke="#404040" stroke-width="1.5" fill="none" marker-end="url(#arrowhead)"/>"##,
                ly - 2,
                uy + uh + 2
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 220.0;
const PANEL_LEFT: f64 = 60.0;
const PANEL_TOP: f64 = 40.0;
const PANEL_STRIDE: f64 = 430.0;
const TRAIN_COLOR: &str = "#1F77B4";
const VAL_COLOR: &str = "#FF7F0E";

struct Panel<'a> {
    title: &'a str,
    y_label: &'a str,
    y_max: f64,
    train: Vec<f64>,
    val: Vec<f64>,
}

fn polyline(out: &mut String, left: f64, y_max: f64, series: &[f64], color: &str, class: &str) {
    let n = series.len();
    let points: Vec<String> = series
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let fx = if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            let x = left + fx * PANEL_W;
            let y = PANEL_TOP + PANEL_H * (1.0 - (v / y_max).clamp(0.0, 1.0));
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        points.join(" ")
    );
}

/// Loss (auto-scaled) on the left, accuracy on a fixed `[0, 1]` axis on the right.
pub fn render_curves(history: &TrainingHistory) -> Result<String> {
    if history.is_empty() {
        return Err(Error::Argument(
            "cannot plot an empty training history".into(),
        ));
    }
    let n = history.len();
    let loss_max = history
        .epochs
        .iter()
        .flat_map(|r| [r.train_loss, r.val_loss])
        .fold(0.0f64, f64::max);
    let panels = [
        Panel {
            title: "Loss",
            y_label: "loss",
            y_max: if loss_max > 0.0 { loss_max * 1.05 } else { 1.0 },
            train: history.epochs.iter().map(|r| r.train_loss).collect(),
            val: history.epochs.iter().map(|r| r.val_loss).collect(),
        },
        Panel {
            title: "Accuracy",
            y_label: "accuracy",
            y_max: 1.0,
            train: history.epochs.iter().map(|r| r.train_acc).collect(),
            val: history.epochs.iter().map(|r| r.val_acc).collect(),
        },
    ];

    let width = PANEL_STRIDE * 2.0;
    let height = PANEL_TOP + PANEL_H + 70.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    for (p, panel) in panels.iter().enumerate() {
        let left = PANEL_LEFT + p as f64 * PANEL_STRIDE;
        let bottom = PANEL_TOP + PANEL_H;
        let right = left + PANEL_W;
        let _ = writeln!(out, r#"<g class="panel" data-panel="{}">"#, panel.y_label);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
            left + PANEL_W / 2.0,
            PANEL_TOP - 16.0,
            panel.title
        );
        let _ = writeln!(
            out,
            r##"<line x1="{left:.2}" y1="{bottom:.2}" x2="{right:.2}" y2="{bottom:.2}" stroke="#000000"/>"##
        );
        let _ = writeln!(
            out,
            r##"<line x1="{left:.2}" y1="{PANEL_TOP:.2}" x2="{left:.2}" y2="{bottom:.2}" stroke="#000000"/>"##
        );
        for (frac, label) in [(0.0, 0.0), (0.5, panel.y_max / 2.0), (1.0, panel.y_max)] {
            let y = bottom - frac * PANEL_H;
            let _ = writeln!(
                out,
                r#"<text class="y-tick" x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{label:.2}</text>"#,
                left - 6.0,
                y + 3.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text class="x-tick" x="{left:.2}" y="{:.2}" font-size="10" text-anchor="middle">1</text>"#,
            bottom + 14.0
        );
        let _ = writeln!(
            out,
            r#"<text class="x-tick" x="{right:.2}" y="{:.2}" font-size="10" text-anchor="middle">{n}</text>"#,
            bottom + 14.0
        );
        let _ = writeln!(
            out,
            r#"<text class="x-label" x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">epoch</text>"#,
            left + PANEL_W / 2.0,
            bottom + 32.0
        );
        let _ = writeln!(
            out,
            r#"<text class="y-label" x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            left - 42.0,
            PANEL_TOP + PANEL_H / 2.0,
            left - 42.0,
            PANEL_TOP + PANEL_H / 2.0,
            panel.y_label
        );
        polyline(
            &mut out,
            left,
            panel.y_max,
            &panel.train,
            TRAIN_COLOR,
            "train",
        );
        polyline(
            &mut out,
            left,
            panel.y_max,
            &panel.val,
            VAL_COLOR,
            "validation",
        );
        out.push_str("</g>\n");
    }
    let legend_y = height - 12.0;
    for (i, (name, color)) in [("train", TRAIN_COLOR), ("validation", VAL_COLOR)]
        .iter()
        .enumerate()
    {
        let x = PANEL_LEFT + i as f64 * 140.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="3"/>"#,
            legend_y - 4.0,
            x + 24.0,
            legend_y - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{legend_y:.2}" font-size="12">{name}</text>"#,
            x + 30.0
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Stage;
    use crate::training::EpochRecord;

    fn record(hidden: Vec<f64>, output: Vec<f64>) -> ActivationRecord {
        ActivationRecord {
            stages: vec![
                Stage {
                    name: "input".into(),
                    values: vec![0.0; 36],
                },
                Stage {
                    name: "hidden1".into(),
                    values: hidden,
                },
                Stage {
                    name: "output".into(),
                    values: output,
                },
            ],
        }
    }

    fn history(n: usize) -> TrainingHistory {
        TrainingHistory {
            epochs: (1..=n)
                .map(|e| EpochRecord {
                    epoch: e,
                    train_loss: 2.0 / e as f64,
                    train_acc: 1.0 - 1.0 / (e as f64 + 1.0),
                    val_loss: 2.5 / e as f64,
                    val_acc: 0.5,
                })
                .collect(),
        }
    }

    #[test]
    fn gray_levels() {
        assert_eq!(gray_level(0.0), 0);
        assert_eq!(gray_level(1.0), 255);
        assert_eq!(gray_level(0.5), 128);
        assert_eq!(gray_level(3.7), 255);
        assert_eq!(gray_level(-0.2), 0);
        assert_eq!(gray_hex(0), "#000000");
        assert_eq!(gray_hex(171), "#ABABAB");
    }

    #[test]
    fn heatmap_shapes() {
        let h = activations_to_heatmap(&record(vec![0.5; 20], vec![0.1; 10]));
        assert_eq!((h.stages[0].rows, h.stages[0].cols), (6, 6));
        assert_eq!((h.stages[1].rows, h.stages[1].cols), (1, 20));
        assert_eq!(h.stages[1].levels, vec![128; 20]);
        assert_eq!(h.stages[2].levels, vec![26; 10]);
    }

    #[test]
    fn diagram_counts_and_fills() {
        let svg = render_diagram(
            &record(vec![0.0; 20], vec![1.0; 10]),
            &DiagramSpec::default(),
            Some("a < b"),
        )
        .unwrap();
        assert_eq!(svg.matches("<rect ").count(), 66);
        assert!(svg.contains(r##"fill="#000000""##));
        assert!(svg.contains(r##"fill="#FFFFFF""##));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("marker-end").count(), 2);
    }

    #[test]
    fn diagram_without_arrows() {
        let spec = DiagramSpec {
            show_arrows: false,
            ..Default::default()
        };
        let svg = render_diagram(&record(vec![0.0; 20], vec![1.0; 10]), &spec, None).unwrap();
        assert!(!svg.contains("marker-end"));
    }

    #[test]
    fn diagram_width_limit() {
        let spec = DiagramSpec {
            max_units_rendered: 16,
            ..Default::default()
        };
        let err = render_diagram(&record(vec![0.0; 20], vec![1.0; 10]), &spec, None).unwrap_err();
        assert!(err.to_string().contains("raise the limit"));
    }

    #[test]
    fn curves_point_counts() {
        for n in [1, 500] {
            let svg = render_curves(&history(n)).unwrap();
            let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
            assert_eq!(lines.len(), 4);
            for l in lines {
                let pts = l
                    .split("points=\"")
                    .nth(1)
                    .unwrap()
                    .split('"')
                    .next()
                    .unwrap();
                assert_eq!(pts.split(' ').count(), n);
            }
        }
        assert!(render_curves(&TrainingHistory::default()).is_err());
    }
}
