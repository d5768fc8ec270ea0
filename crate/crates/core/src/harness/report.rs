use std::fmt::Write;

use crate::eval::Group;

use super::EvalResult;

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per (model, task) with accuracy, abstention and wrong-answer rates.
pub fn report_csv(results: &[EvalResult]) -> String {
    let mut out = String::from("model,shots,group,task,n,accuracy,abstain_rate,wrong_rate\n");
    for r in results {
        for t in &r.per_task {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.4},{:.4},{:.4}",
                csv_field(&r.config.model),
                r.config.shots,
                t.group.short(),
                csv_field(&t.task),
                t.n,
                t.accuracy,
                t.abstain_rate,
                t.wrong_rate
            );
        }
    }
    out
}

/// One row per model with the CI, US and SR group accuracies.
pub fn summary_csv(results: &[EvalResult]) -> String {
    let mut out = String::from("model,shots,CI,US,SR\n");
    for r in results {
        let cols: Vec<String> =
            Group::ALL.iter().map(|g| r.group_accuracy(*g).map(|a| format!("{a:.4}")).unwrap_or_default()).collect();
        let _ = writeln!(out, "{},{},{}", csv_field(&r.config.model), r.config.shots, cols.join(","));
    }
    out
}
