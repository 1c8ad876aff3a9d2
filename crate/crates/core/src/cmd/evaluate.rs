use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use latprog::stats::{bootstrap_ci, optimal_cutoff, permutation_pvalue, roc_auc, ScoredCohort};
use latprog::{Error, Result};

use super::{open, with_suffix, write_json, Run};

#[derive(clap::Args)]
pub struct Args {
    /// CSV with `subject_id,side,score_model_a,score_model_b,label`.
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    redraws: usize,
    #[arg(long, default_value_t = 1_000)]
    perm: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct Row {
    #[allow(dead_code)]
    subject_id: String,
    #[allow(dead_code)]
    side: String,
    score_model_a: f64,
    score_model_b: f64,
    label: String,
}

#[derive(Serialize)]
struct Metric {
    value: f64,
    ci_lo: f64,
    ci_hi: f64,
    sd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_value: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    n: usize,
    positives: usize,
    redraws: usize,
    permutations: usize,
    seed: u64,
    metrics: BTreeMap<String, Metric>,
}

#[derive(Serialize)]
struct Config {
    redraws: usize,
    perm: usize,
}

fn parse_label(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::format("scores csv", format!("label must be 0/1, got {other:?}"))),
    }
}

fn read_scores(path: &PathBuf) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = reader.headers().map_err(|e| Error::format("scores csv", e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["subject_id", "side", "score_model_a", "score_model_b", "label"] {
        return Err(Error::format("scores csv", "header must be subject_id,side,score_model_a,score_model_b,label"));
    }
    let (mut a, mut b, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::format("scores csv", e.to_string()))?;
        a.push(row.score_model_a);
        b.push(row.score_model_b);
        labels.push(parse_label(&row.label)?);
    }
    Ok((a, b, labels))
}

pub fn run(a: Args) -> Result<()> {
    let run = Run::start("evaluate");
    let (sa, sb, labels) = read_scores(&a.scores)?;
    let ca = ScoredCohort::new(sa.clone(), labels.clone())?;
    let cb = ScoredCohort::new(sb.clone(), labels.clone())?;
    if !ca.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let auc_test = permutation_pvalue(&sa, &sb, &labels, roc_auc, a.perm, a.seed)?;

    let mut metrics = BTreeMap::new();
    for (name, cohort) in [("a", &ca), ("b", &cb)] {
        let auc = bootstrap_ci(roc_auc, cohort, a.redraws, a.seed)?;
        metrics.insert(
            format!("auc_{name}"),
            Metric {
                value: auc.point,
                ci_lo: auc.lo,
                ci_hi: auc.hi,
                sd: auc.sd,
                p_value: None,
            },
        );
        for (what, pick) in [("sensitivity", true), ("specificity", false)] {
            let f = |c: &ScoredCohort| optimal_cutoff(c).map(|k| if pick { k.sensitivity } else { k.specificity });
            let ci = bootstrap_ci(f, cohort, a.redraws, a.seed)?;
            metrics.insert(
                format!("{what}_{name}"),
                Metric {
                    value: ci.point,
                    ci_lo: ci.lo,
                    ci_hi: ci.hi,
                    sd: ci.sd,
                    p_value: None,
                },
            );
        }
    }
    let (lo, hi) = (metrics["auc_a"].ci_lo - metrics["auc_b"].ci_hi, metrics["auc_a"].ci_hi - metrics["auc_b"].ci_lo);
    metrics.insert(
        "auc_difference".into(),
        Metric {
            value: auc_test.observed_delta,
            ci_lo: lo,
            ci_hi: hi,
            sd: (metrics["auc_a"].sd.powi(2) + metrics["auc_b"].sd.powi(2)).sqrt(),
            p_value: Some(auc_test.p_value),
        },
    );
    let report = Report {
        n: ca.len(),
        positives: ca.positives(),
        redraws: a.redraws,
        permutations: a.perm,
        seed: a.seed,
        metrics,
    };
    write_json(&a.out, &report)?;
    let config = Config {
        redraws: a.redraws,
        perm: a.perm,
    };
    run.finish(&config, vec![a.seed], vec![a.scores.clone()], vec![a.out.clone()], &with_suffix(&a.out, ".manifest.json"))
}
