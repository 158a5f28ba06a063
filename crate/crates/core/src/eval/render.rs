use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{EvalReport, Improvement};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

/// Aligned text table: one block per (model, scenario) with a row per class
/// and a closing `average` row.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:<4} {:>8}  {:<12} {:>6} {:>6} {:>6} {:>6}",
        "model", "scen", "acc(%)", "class", "pre", "rec", "f1", "auc"
    );
    for r in reports {
        for (i, c) in r.per_class.iter().enumerate() {
            let (m, sc, acc) = if i == 0 {
                (r.model.as_str().to_string(), r.scenario.to_string(), format!("{:.1}", 100.0 * r.accuracy))
            } else {
                Default::default()
            };
            let flag = if c.degenerate { "*" } else { "" };
            let _ = writeln!(
                s,
                "{m:<14} {sc:<4} {acc:>8}  {:<12} {:>6.3} {:>6.3} {:>6} {:>6}",
                c.class,
                c.precision,
                c.recall,
                format!("{:.3}{flag}", c.f1),
                opt(c.auc)
            );
        }
        let a = &r.macro_avg;
        let _ = writeln!(
            s,
            "{:<14} {:<4} {:>8}  {:<12} {:>6.3} {:>6.3} {:>6.3} {:>6}",
            "",
            "",
            "",
            "average",
            a.precision,
            a.recall,
            a.f1,
            opt(a.auc)
        );
    }
    s
}

pub fn render_improvements(rows: &[Improvement]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "model", "d_acc", "d_pre", "d_rec", "d_f1", "d_auc"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<14} {:>+8.3} {:>+8.3} {:>+8.3} {:>+8.3} {:>8}",
            r.model.as_str(),
            r.accuracy,
            r.precision,
            r.recall,
            r.f1,
            r.auc.map_or_else(|| "-".to_string(), |v| format!("{v:+.3}"))
        );
    }
    s
}

/// One `fpr,tpr,threshold` file per class with a defined curve.
pub fn write_roc_csvs(report: &EvalReport, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (c, curve) in report.per_class.iter().zip(&report.roc) {
        let Some(curve) = curve else { continue };
        let path = dir.join(format!("roc_{}_{}_{}.csv", report.model, report.scenario, c.class));
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "fpr,tpr,threshold")?;
        for p in &curve.points {
            writeln!(w, "{:?},{:?},{:?}", p.fpr, p.tpr, p.threshold)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_confusion_csv(report: &EvalReport, dir: &Path) -> std::io::Result<PathBuf> {
    let path = dir.join(format!("confusion_{}_{}.csv", report.model, report.scenario));
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    let names: Vec<&str> = report.per_class.iter().map(|c| c.class.as_str()).collect();
    writeln!(w, "true\\pred,{}", names.join(","))?;
    for (name, row) in names.iter().zip(report.confusion.counts()) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        writeln!(w, "{name},{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(path)
}
