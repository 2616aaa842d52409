//! Clustered score tables with best-in-cluster marking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::backends::ModelKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "SacreBLEU", alias = "sacrebleu")]
    SacreBleu,
    #[serde(rename = "hLEPOR", alias = "hlepor")]
    Hlepor,
    #[serde(rename = "BERTScore", alias = "bertscore")]
    BertScore,
    #[serde(rename = "COMET", alias = "comet")]
    Comet,
}

impl std::str::FromStr for Metric {
    type Err = String;

    /// Case-insensitive column name; `bleu` is accepted for SacreBLEU.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Metric::ALL
            .into_iter()
            .find(|m| m.column().to_ascii_lowercase() == lower || (lower == "bleu" && *m == Metric::SacreBleu))
            .ok_or_else(|| format!("unknown metric `{s}` (expected sacrebleu, hlepor, bertscore or comet)"))
    }
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::SacreBleu, Metric::Hlepor, Metric::BertScore, Metric::Comet];

    pub fn column(self) -> &'static str {
        match self {
            Metric::SacreBleu => "SacreBLEU",
            Metric::Hlepor => "hLEPOR",
            Metric::BertScore => "BERTScore",
            Metric::Comet => "COMET",
        }
    }

    fn decimals(self) -> usize {
        match self {
            Metric::SacreBleu => 2,
            _ => 4,
        }
    }
}

/// One evaluated system. A metric mapped to `None` was requested but could
/// not be computed and renders as `n/a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub system: String,
    pub model: Option<ModelKey>,
    pub cluster: u32,
    pub scores: BTreeMap<Metric, Option<f64>>,
    /// Provenance notes such as tokenization scheme and adapter versions.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    #[serde(flatten)]
    pub row: ScoreRow,
    pub best: BTreeSet<Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBlock {
    pub cluster: u32,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub columns: Vec<Metric>,
    pub clusters: Vec<ClusterBlock>,
}

/// Groups rows by cluster (ascending), orders each cluster by model key
/// (rows without a key keep input order, after keyed rows) and flags every
/// row holding the cluster maximum of a metric.
pub fn build_score_table(rows: Vec<ScoreRow>) -> Result<ScoreTable, MetricError> {
    if rows.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let columns: Vec<Metric> = Metric::ALL
        .into_iter()
        .filter(|m| rows.iter().any(|r| r.scores.contains_key(m)))
        .collect();
    let mut grouped: BTreeMap<u32, Vec<ScoreRow>> = BTreeMap::new();
    for row in rows {
        grouped.entry(row.cluster).or_default().push(row);
    }
    let clusters = grouped
        .into_iter()
        .map(|(cluster, mut rows)| {
            rows.sort_by_key(|r| (r.model.is_none(), r.model));
            let best_of = |m: Metric| {
                rows.iter()
                    .filter_map(|r| r.scores.get(&m).copied().flatten())
                    .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            };
            let maxima: BTreeMap<Metric, f64> = columns.iter().filter_map(|&m| best_of(m).map(|v| (m, v))).collect();
            let rows = rows
                .into_iter()
                .map(|row| {
                    let best = maxima
                        .iter()
                        .filter(|(m, max)| row.scores.get(m).copied().flatten() == Some(**max))
                        .map(|(m, _)| *m)
                        .collect();
                    TableRow { row, best }
                })
                .collect();
            ClusterBlock { cluster, rows }
        })
        .collect();
    Ok(ScoreTable { columns, clusters })
}

impl ScoreTable {
    /// Aligned plain-text rendering; best scores carry a trailing `*`.
    pub fn render_text(&self) -> String {
        let mut header = vec!["cluster".to_string(), "system".to_string()];
        header.extend(self.columns.iter().map(|m| m.column().to_string()));
        let mut lines: Vec<Vec<String>> = Vec::new();
        for block in &self.clusters {
            for r in &block.rows {
                let mut cells = vec![block.cluster.to_string(), r.row.system.clone()];
                for m in &self.columns {
                    cells.push(match r.row.scores.get(m).copied().flatten() {
                        Some(v) => {
                            let mark = if r.best.contains(m) { "*" } else { "" };
                            format!("{v:.prec$}{mark}", prec = m.decimals())
                        }
                        None => "n/a".to_string(),
                    });
                }
                lines.push(cells);
            }
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                lines
                    .iter()
                    .map(|l| l[i].chars().count())
                    .chain([header[i].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let fmt_line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                if i < 2 {
                    let _ = write!(s, "{cell:<w$}");
                } else {
                    let _ = write!(s, "{cell:>w$}");
                }
            }
            s.trim_end().to_string()
        };
        let mut out = fmt_line(&header);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        let mut prev_cluster = None;
        let mut idx = 0;
        for block in &self.clusters {
            if prev_cluster.is_some() {
                out.push('\n');
            }
            prev_cluster = Some(block.cluster);
            for _ in &block.rows {
                out.push_str(&fmt_line(&lines[idx]));
                out.push('\n');
                idx += 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BaseModel, TrainingCategory};
    use crate::lang::Direction;

    fn row(system: &str, cluster: u32, bleu: Option<f64>, hlepor: f64) -> ScoreRow {
        ScoreRow {
            system: system.into(),
            model: None,
            cluster,
            scores: BTreeMap::from([(Metric::SacreBleu, bleu), (Metric::Hlepor, Some(hlepor))]),
            notes: BTreeMap::new(),
        }
    }

    fn flags(t: &ScoreTable) -> Vec<(String, Vec<Metric>)> {
        t.clusters
            .iter()
            .flat_map(|c| c.rows.iter().map(|r| (r.row.system.clone(), r.best.iter().copied().collect())))
            .collect()
    }

    #[test]
    fn single_row_is_best_everywhere() {
        let t = build_score_table(vec![row("a", 1, Some(10.0), 0.5)]).unwrap();
        assert_eq!(flags(&t), vec![("a".into(), vec![Metric::SacreBleu, Metric::Hlepor])]);
    }

    #[test]
    fn ties_flag_all_maxima() {
        let t = build_score_table(vec![row("a", 1, Some(10.0), 0.5), row("b", 1, Some(10.0), 0.4)]).unwrap();
        assert_eq!(
            flags(&t),
            vec![("a".into(), vec![Metric::SacreBleu, Metric::Hlepor]), ("b".into(), vec![Metric::SacreBleu])]
        );
    }

    #[test]
    fn three_clusters_have_independent_flags() {
        let rows = vec![
            row("nllb-ft", 1, Some(15.0), 0.55),
            row("nllb-syn-1:1", 1, Some(16.0), 0.54),
            row("nllb-ft-wenlin", 2, Some(17.0), 0.57),
            row("mbart-ft-wenlin", 2, Some(14.0), 0.58),
            row("nllb-baseline", 3, Some(8.0), 0.40),
            row("opus-baseline", 3, None, 0.30),
        ];
        let t = build_score_table(rows).unwrap();
        assert_eq!(t.clusters.len(), 3);
        assert_eq!(
            flags(&t),
            vec![
                ("nllb-ft".into(), vec![Metric::Hlepor]),
                ("nllb-syn-1:1".into(), vec![Metric::SacreBleu]),
                ("nllb-ft-wenlin".into(), vec![Metric::SacreBleu]),
                ("mbart-ft-wenlin".into(), vec![Metric::Hlepor]),
                ("nllb-baseline".into(), vec![Metric::SacreBleu, Metric::Hlepor]),
                ("opus-baseline".into(), vec![]),
            ]
        );
        let text = t.render_text();
        assert!(text.contains("n/a"));
        assert!(text.contains("16.00*"));
    }

    #[test]
    fn rows_sorted_by_descriptor() {
        let key = |b, c: &str| Some(ModelKey::new(b, c.parse::<TrainingCategory>().unwrap(), Direction::YUE_EN));
        let mut a = row("nllb-syn-1:1", 1, Some(1.0), 0.1);
        a.model = key(BaseModel::Nllb, "ft-syn-1:1");
        let mut b = row("opus-ft", 1, Some(1.0), 0.1);
        b.model = key(BaseModel::Opus, "ft");
        let c = row("bing", 1, Some(1.0), 0.1);
        let t = build_score_table(vec![c, a, b]).unwrap();
        let names: Vec<_> = flags(&t).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["opus-ft", "nllb-syn-1:1", "bing"]);
    }

    #[test]
    fn metric_names_parse() {
        assert_eq!("BLEU".parse::<Metric>().unwrap(), Metric::SacreBleu);
        assert_eq!("hlepor".parse::<Metric>().unwrap(), Metric::Hlepor);
        assert!("ter".parse::<Metric>().is_err());
    }

    #[test]
    fn empty_input_rejected() {
        assert!(build_score_table(vec![]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = build_score_table(vec![row("a", 1, None, 0.5)]).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<ScoreTable>(&text).unwrap(), t);
    }
}
