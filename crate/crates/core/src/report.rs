//! Report rendering for ranked causes: CSV tables for the per-graph effect
//! multi-sets and modifier findings, plus dependency-free SVG bar charts.
//! Everything here is a pure function of its inputs with fixed number
//! formatting, so outputs are byte-stable across runs and platforms.

use crate::effects::CauseRecord;
use crate::error::{Error, Result};

fn check_arity(records: &[CauseRecord], algorithms: &[String]) -> Result<()> {
    for r in records {
        if r.effects.len() != algorithms.len() {
            return Err(Error::config(format!(
                "record {} has {} effect entries for {} algorithms",
                r.variable,
                r.effects.len(),
                algorithms.len()
            )));
        }
    }
    Ok(())
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| Error::internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::internal(e.to_string()))
}

/// One row per ranked cause: rank, variable, support, then the effect
/// multi-set and p-values with one column per ensemble graph. Records are
/// emitted in the order given (which is the display ranking).
pub fn ranked_causes_csv(records: &[CauseRecord], algorithms: &[String]) -> Result<String> {
    if records.is_empty() {
        return Ok(String::new());
    }
    check_arity(records, algorithms)?;
    let mut header = vec!["rank".to_string(), "variable".to_string(), "support".to_string()];
    for (k, alg) in algorithms.iter().enumerate() {
        header.push(format!("effect_{k}_{alg}"));
    }
    for (k, alg) in algorithms.iter().enumerate() {
        header.push(format!("p_{k}_{alg}"));
    }
    let mut rows = vec![header];
    for (i, r) in records.iter().enumerate() {
        let mut row = vec![
            (i + 1).to_string(),
            r.variable.clone(),
            format!("{:.6}", r.support),
        ];
        for e in &r.effects {
            row.push(format!("{:.6}", e.ate));
        }
        for e in &r.effects {
            row.push(e.p_value.map(|p| format!("{p:.6}")).unwrap_or_default());
        }
        rows.push(row);
    }
    csv_string(rows)
}

/// One row per (cause, modifier) finding with both conditional effects and
/// their difference.
pub fn modifier_report_csv(records: &[CauseRecord]) -> Result<String> {
    if records.is_empty() {
        return Ok(String::new());
    }
    let mut rows = vec![vec![
        "variable".to_string(),
        "modifier".to_string(),
        "graph".to_string(),
        "cate_z0".to_string(),
        "cate_z1".to_string(),
        "delta".to_string(),
        "p_value".to_string(),
        "significant".to_string(),
    ]];
    for r in records {
        for m in &r.modifiers {
            rows.push(vec![
                r.variable.clone(),
                m.modifier.clone(),
                m.graph.to_string(),
                format!("{:.6}", m.cate_z0),
                format!("{:.6}", m.cate_z1),
                format!("{:.6}", m.delta),
                format!("{:.6}", m.p_value),
                m.significant.to_string(),
            ]);
        }
    }
    csv_string(rows)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2", "#edc948", "#9c755f",
];

const PLOT_TOP: f64 = 40.0;
const PLOT_BOTTOM: f64 = 300.0;
const MARGIN_LEFT: f64 = 64.0;
const BAR_W: f64 = 18.0;
const GROUP_GAP: f64 = 16.0;

/// Grouped bar chart on a symmetric value axis around zero. Bars for each
/// group are drawn side by side in series order; labels go under the group.
fn grouped_bar_svg(title: &str, series: &[String], groups: &[(String, Vec<f64>)]) -> String {
    let vmax = groups
        .iter()
        .flat_map(|(_, vs)| vs.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-9);
    let mid = (PLOT_TOP + PLOT_BOTTOM) / 2.0;
    let half = (PLOT_BOTTOM - PLOT_TOP) / 2.0;
    let group_w = series.len() as f64 * BAR_W + GROUP_GAP;
    let width = (MARGIN_LEFT + groups.len() as f64 * group_w + 24.0).max(360.0);
    let height = 360.0;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">\n"
    ));
    s.push_str(&format!(
        "  <text x=\"{MARGIN_LEFT:.0}\" y=\"18\" font-size=\"13\">{}</text>\n",
        xml_escape(title)
    ));
    // legend, one swatch per series
    for (i, name) in series.iter().enumerate() {
        let x = MARGIN_LEFT + 80.0 * i as f64;
        s.push_str(&format!(
            "  <rect x=\"{x:.2}\" y=\"24\" width=\"9\" height=\"9\" fill=\"{}\"/>\n",
            PALETTE[i % PALETTE.len()]
        ));
        s.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"32\" font-size=\"10\">{}</text>\n",
            x + 12.0,
            xml_escape(name)
        ));
    }
    // value axis: zero line plus the symmetric extremes
    s.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT:.2}\" y1=\"{mid:.2}\" x2=\"{:.2}\" y2=\"{mid:.2}\" \
         stroke=\"#888888\" stroke-width=\"1\"/>\n",
        width - 16.0
    ));
    for (v, y) in [(vmax, PLOT_TOP), (0.0, mid), (-vmax, PLOT_BOTTOM)] {
        s.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{v:.3}</text>\n",
            MARGIN_LEFT - 6.0,
            y + 3.0
        ));
    }
    for (gi, (label, values)) in groups.iter().enumerate() {
        let gx = MARGIN_LEFT + gi as f64 * group_w;
        for (si, &v) in values.iter().enumerate() {
            let x = gx + si as f64 * BAR_W;
            let h = (v.abs() / vmax) * half;
            let y = if v >= 0.0 { mid - h } else { mid };
            s.push_str(&format!(
                "  <rect class=\"bar\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" \
                 height=\"{h:.2}\" fill=\"{}\"/>\n",
                BAR_W - 2.0,
                PALETTE[si % PALETTE.len()]
            ));
        }
        let cx = gx + (values.len() as f64 * BAR_W) / 2.0;
        s.push_str(&format!(
            "  <text x=\"{cx:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            PLOT_BOTTOM + 18.0,
            xml_escape(label)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Multi-set effect chart: one group per ranked cause, one bar per graph.
pub fn effect_bars_svg(records: &[CauseRecord], algorithms: &[String]) -> Result<String> {
    if records.is_empty() {
        return Ok(String::new());
    }
    check_arity(records, algorithms)?;
    let groups: Vec<(String, Vec<f64>)> = records
        .iter()
        .map(|r| (r.variable.clone(), r.effect_multiset()))
        .collect();
    Ok(grouped_bar_svg("total effect on the outcome by graph", algorithms, &groups))
}

/// Modifier chart: for each (cause, modifier) pair the two conditional
/// effects side by side; the gap between the bars is the interaction.
pub fn modifier_bars_svg(records: &[CauseRecord]) -> Result<String> {
    if records.is_empty() {
        return Ok(String::new());
    }
    let series = vec!["cate at z=0".to_string(), "cate at z=1".to_string()];
    let groups: Vec<(String, Vec<f64>)> = records
        .iter()
        .flat_map(|r| {
            r.modifiers.iter().map(|m| {
                (
                    format!("{} | {}", r.variable, m.modifier),
                    vec![m.cate_z0, m.cate_z1],
                )
            })
        })
        .collect();
    Ok(grouped_bar_svg("conditional effects by modifier level", &series, &groups))
}

/// All four report artifacts for an already-ranked record list. Empty input
/// produces empty strings so callers can write empty files and warn.
pub struct ReportBundle {
    pub ranked_csv: String,
    pub effects_svg: String,
    pub modifiers_csv: String,
    pub modifiers_svg: String,
}

pub fn build_report(ranked: &[CauseRecord], algorithms: &[String]) -> Result<ReportBundle> {
    Ok(ReportBundle {
        ranked_csv: ranked_causes_csv(ranked, algorithms)?,
        effects_svg: effect_bars_svg(ranked, algorithms)?,
        modifiers_csv: modifier_report_csv(ranked)?,
        modifiers_svg: modifier_bars_svg(ranked)?,
    })
}
