//! Comparison tables across kernel choices and datasets.

use std::fmt::Write as _;

use super::{CalibrationResult, KernelChoice};
use crate::scalar::Scalar;

/// Plain-text grid and a long-format delimited table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonTable {
    pub text: String,
    pub csv: String,
}

fn pct<T: Scalar>(r: &super::RSquared<T>) -> String {
    if r.undefined {
        "undef".to_string()
    } else {
        format!("{:.2}", 100.0 * r.value.to_f64_lossy())
    }
}

/// One row per kernel choice, a train/test column pair per dataset, then
/// the `2λδ/α` row for exp/tspl fits.
pub fn render_report<T: Scalar>(results: &[CalibrationResult<T>]) -> ComparisonTable {
    let mut datasets: Vec<&str> = Vec::new();
    for r in results {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
    }
    let choices: Vec<KernelChoice> =
        KernelChoice::ALL.into_iter().filter(|c| results.iter().any(|r| r.choice == *c)).collect();
    let find = |c: KernelChoice, d: &str| results.iter().find(|r| r.choice == c && r.dataset == d);
    let label = |d: &str| if d.is_empty() { "data".to_string() } else { d.to_string() };

    let mut header = vec!["kernels".to_string()];
    for d in &datasets {
        header.push(format!("{} train", label(d)));
        header.push(format!("{} test", label(d)));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for &c in &choices {
        let mut row = vec![c.to_string()];
        for d in &datasets {
            match find(c, d) {
                Some(r) => {
                    row.push(pct(&r.r2_train));
                    row.push(pct(&r.r2_test));
                }
                None => row.extend(["-".to_string(), "-".to_string()]),
            }
        }
        rows.push(row);
    }
    if choices.contains(&KernelChoice::ExpTspl) {
        let mut row = vec!["2λδ/α (exp/tspl)".to_string()];
        for d in &datasets {
            let cell = find(KernelChoice::ExpTspl, d)
                .and_then(|r| {
                    r.positivity
                        .ratio
                        .map(|v| format!("{:.2} {}", v.to_f64_lossy(), if r.positivity.pass { "PASS" } else { "FAIL" }))
                })
                .unwrap_or_else(|| "-".to_string());
            row.push(cell.clone());
            row.push(String::new());
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).chain([header[j].chars().count()]).max().unwrap_or(0))
        .collect();
    let mut text = String::from("R² in percent; test R² centers SST on the test-set mean\n");
    let line = |cells: &[String]| {
        cells
            .iter()
            .enumerate()
            .map(|(j, c)| if j == 0 { format!("{c:<w$}", w = widths[j]) } else { format!("{c:>w$}", w = widths[j]) })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let _ = writeln!(text, "{}", line(&header));
    for r in &rows {
        let _ = writeln!(text, "{}", line(r));
    }

    let mut csv = String::from(
        "choice,dataset,r2_train,r2_test,r2_train_undefined,r2_test_undefined,ratio,ratio_status,beta0,beta1,beta2\n",
    );
    for &c in &choices {
        for d in &datasets {
            if let Some(r) = find(c, d) {
                let _ = writeln!(
                    csv,
                    "{},{},{:?},{:?},{},{},{},{},{:?},{:?},{:?}",
                    c,
                    d,
                    r.r2_train.value.to_f64_lossy(),
                    r.r2_test.value.to_f64_lossy(),
                    r.r2_train.undefined,
                    r.r2_test.undefined,
                    r.positivity.ratio.map_or_else(String::new, |v| format!("{:?}", v.to_f64_lossy())),
                    r.positivity.status,
                    r.betas.b0.to_f64_lossy(),
                    r.betas.b1.to_f64_lossy(),
                    r.betas.b2.to_f64_lossy(),
                );
            }
        }
    }
    ComparisonTable { text, csv }
}
