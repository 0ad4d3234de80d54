use std::fmt::Write as _;

use super::ranking::{best_per_algorithm, rank_models, ModelResult, PairTest, ScoreName};
use crate::dataset::FeatureSetVariant;

pub const RANKING_COLUMNS: [&str; 9] = [
    "rank",
    "config_id",
    "algorithm",
    "variant",
    "accuracy",
    "precision",
    "recall",
    "f_measure",
    "mcc",
];

pub const SIGNIFICANCE_COLUMNS: [&str; 5] = ["pair", "T", "p_value", "n_effective", "method"];

/// Number of rows in the per-variant top rankings.
pub const TOP_K: usize = 10;

fn score_cells(r: &ModelResult) -> [String; 5] {
    let s = &r.scores;
    [s.accuracy, s.precision, s.recall, s.f_measure, s.mcc].map(|v| format!("{v:.6}"))
}

fn ranking_csv(rows: &[ModelResult]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RANKING_COLUMNS).expect("in-memory write");
    for (i, r) in rows.iter().enumerate() {
        let mut rec = vec![
            (i + 1).to_string(),
            r.config_id.to_string(),
            r.algorithm.clone(),
            r.variant.to_string(),
        ];
        rec.extend(score_cells(r));
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn ranking_markdown(title: &str, rows: &[ModelResult], out: &mut String) {
    let _ = writeln!(out, "## {title}\n");
    let _ = writeln!(out, "| {} |", RANKING_COLUMNS.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(RANKING_COLUMNS.len()));
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            i + 1,
            r.config_id,
            r.algorithm,
            r.variant,
            score_cells(r).join(" | ")
        );
    }
    out.push('\n');
}

fn significance_csv(tests: &[PairTest]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SIGNIFICANCE_COLUMNS).expect("in-memory write");
    for t in tests {
        w.write_record([
            t.pair.clone(),
            t.result.t.to_string(),
            format!("{:.6e}", t.result.p_value),
            t.result.n_effective.to_string(),
            t.result.method.as_str().to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

/// Report files as (file name, contents):
/// - `ranking_<score>.csv`: every result ranked by each score,
/// - `top10_recall_<variant>.csv`: the recall top list per feature set,
/// - `best_per_algorithm.csv`: best configuration of each algorithm by F-measure,
/// - `significance.csv`: paired feature-set tests (only when `tests` is non-empty),
/// - `report.md`: Markdown mirror of the above.
pub fn emit_report(results: &[ModelResult], tests: &[PairTest]) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut md = String::from("# Model evaluation\n\n");
    for score in ScoreName::ALL {
        let rows = rank_models(results, score.as_str(), usize::MAX).expect("known score");
        files.push((format!("ranking_{}.csv", score.as_str()), ranking_csv(&rows)));
    }
    for v in FeatureSetVariant::ALL {
        let subset: Vec<ModelResult> = results.iter().filter(|r| r.variant == v).cloned().collect();
        if subset.is_empty() {
            continue;
        }
        let rows = rank_models(&subset, "recall", TOP_K).expect("known score");
        ranking_markdown(&format!("Top {TOP_K} by recall, {v}"), &rows, &mut md);
        files.push((
            format!("top10_recall_{}.csv", v.file_suffix()),
            ranking_csv(&rows),
        ));
    }

    let best = best_per_algorithm(results);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "variant",
        "config_id",
        "accuracy",
        "precision",
        "recall",
        "f_measure",
        "mcc",
    ])
    .expect("in-memory write");
    let _ = writeln!(md, "## Best configuration per algorithm\n");
    let _ = writeln!(
        md,
        "| algorithm | variant | config_id | accuracy | precision | recall | f_measure | mcc |"
    );
    let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
    for r in &best {
        let mut rec = vec![r.algorithm.clone(), r.variant.to_string(), r.config_id.to_string()];
        rec.extend(score_cells(r));
        let _ = writeln!(md, "| {} |", rec.join(" | "));
        w.write_record(&rec).expect("in-memory write");
    }
    md.push('\n');
    files.push((
        "best_per_algorithm.csv".into(),
        w.into_inner().expect("in-memory write"),
    ));

    if !tests.is_empty() {
        files.push(("significance.csv".into(), significance_csv(tests)));
        let _ = writeln!(md, "## Wilcoxon signed-rank tests\n");
        let _ = writeln!(md, "| {} |", SIGNIFICANCE_COLUMNS.join(" | "));
        let _ = writeln!(md, "|---|---|---|---|---|");
        for t in tests {
            let _ = writeln!(
                md,
                "| {} | {} | {:.6e} | {} | {} |",
                t.pair,
                t.result.t,
                t.result.p_value,
                t.result.n_effective,
                t.result.method.as_str()
            );
        }
        md.push('\n');
    }
    files.push(("report.md".into(), md.into_bytes()));
    files
}
