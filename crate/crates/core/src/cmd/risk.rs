use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use latprog::latent::{KneeKey, Side};
use latprog::risk::{read_probabilities, risk_trajectory, ProbabilityVector};
use latprog::{Error, Result};

use super::{open, with_suffix, write_json, Run};

#[derive(clap::Args)]
pub struct Args {
    /// Grade probability CSV.
    #[arg(long)]
    probs: PathBuf,
    /// Visit used as the reference for every knee.
    #[arg(long, default_value_t = 0)]
    baseline_month: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct KneeRisk {
    subject_id: String,
    side: Side,
    baseline_month: u32,
    months: Vec<u32>,
    p_progress: Vec<f64>,
}

#[derive(Serialize)]
struct Report {
    baseline_month: u32,
    knees: Vec<KneeRisk>,
    /// Knees without a baseline row or without a later visit.
    skipped: Vec<String>,
}

pub fn run(a: Args) -> Result<()> {
    let run = Run::start("risk");
    let rows = read_probabilities(open(&a.probs)?)?;
    let mut by_knee: BTreeMap<KneeKey, BTreeMap<u32, ProbabilityVector>> = BTreeMap::new();
    for (key, p) in rows {
        if by_knee.entry(key.knee()).or_default().insert(key.visit_month, p).is_some() {
            return Err(Error::DuplicateVisit(key.to_string()));
        }
    }
    let mut knees = Vec::new();
    let mut skipped = Vec::new();
    for (knee, visits) in by_knee {
        let Some(base) = visits.get(&a.baseline_month) else {
            log::warn!("{knee}: no visit at month {}", a.baseline_month);
            skipped.push(knee.to_string());
            continue;
        };
        let (months, probs): (Vec<u32>, Vec<ProbabilityVector>) =
            visits.range(a.baseline_month + 1..).map(|(m, p)| (*m, *p)).unzip();
        match risk_trajectory(base, &probs) {
            Ok(p_progress) => knees.push(KneeRisk {
                subject_id: knee.subject_id,
                side: knee.side,
                baseline_month: a.baseline_month,
                months,
                p_progress,
            }),
            Err(Error::EmptyFollowups) => {
                log::warn!("{knee}: no follow-up after month {}", a.baseline_month);
                skipped.push(knee.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    let report = Report {
        baseline_month: a.baseline_month,
        knees,
        skipped,
    };
    write_json(&a.out, &report)?;
    run.finish(&a.baseline_month, vec![], vec![a.probs.clone()], vec![a.out.clone()], &with_suffix(&a.out, ".manifest.json"))
}
