use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StudyRecord;
use crate::mutation::MutationKind;
use crate::robustness::kendall_tau_b;

/// Reference-free score columns of a record file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Csc,
    NlivS,
    NlivW,
    Sp,
    Rate,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Csc, Metric::NlivS, Metric::NlivW, Metric::Sp, Metric::Rate];

    pub fn column(&self) -> &'static str {
        match self {
            Metric::Csc => "csc",
            Metric::NlivS => "nliv_s",
            Metric::NlivW => "nliv_w",
            Metric::Sp => "sp",
            Metric::Rate => "rate",
        }
    }

    pub fn value(&self, r: &StudyRecord) -> Option<f64> {
        match self {
            Metric::Csc => r.csc,
            Metric::NlivS => r.nliv_s,
            Metric::NlivW => r.nliv_w,
            Metric::Sp => r.sp,
            Metric::Rate => r.rate,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "csc" => Ok(Metric::Csc),
            "nliv_s" => Ok(Metric::NlivS),
            "nliv_w" => Ok(Metric::NlivW),
            "sp" => Ok(Metric::Sp),
            "rate" => Ok(Metric::Rate),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// Correlation of one metric with F1. `tau`, `p` and `stars` are absent
/// (NA) when the correlation is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub tau: Option<f64>,
    pub p: Option<f64>,
    pub stars: Option<String>,
    /// Records with both values present.
    pub n: usize,
    /// Records skipped because either value was NA.
    pub dropped: usize,
}

impl Correlation {
    pub fn is_na(&self) -> bool {
        self.tau.is_none()
    }
}

/// Kendall tau-b between F1 and `metric`, dropping records where either is NA.
pub fn correlate<'a, I>(records: I, metric: Metric) -> Correlation
where
    I: IntoIterator<Item = &'a StudyRecord>,
{
    let mut f1 = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0;
    for r in records {
        match (r.f1, metric.value(r)) {
            (Some(a), Some(b)) => {
                f1.push(a);
                values.push(b);
            }
            _ => dropped += 1,
        }
    }
    match kendall_tau_b(&f1, &values) {
        Ok(c) => Correlation {
            tau: Some(c.tau),
            p: Some(c.p_value),
            stars: Some(c.stars),
            n: c.n,
            dropped,
        },
        Err(_) => Correlation {
            tau: None,
            p: None,
            stars: None,
            n: f1.len(),
            dropped,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub dataset: String,
    pub kind: MutationKind,
    pub records: usize,
    /// Pooled over all seeds and checkpoints.
    pub metrics: BTreeMap<Metric, Correlation>,
    /// The same correlations restricted to one mutation count.
    pub by_checkpoint: BTreeMap<usize, BTreeMap<Metric, Correlation>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub groups: Vec<GroupReport>,
}

/// Correlations of every metric with F1 per dataset and mutation kind.
pub fn correlation_report(records: &[StudyRecord]) -> CorrelationReport {
    let mut groups: BTreeMap<(String, MutationKind), Vec<&StudyRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.dataset.clone(), r.kind)).or_default().push(r);
    }
    let table = |rs: &[&StudyRecord]| -> BTreeMap<Metric, Correlation> {
        Metric::ALL
            .iter()
            .map(|&m| (m, correlate(rs.iter().copied(), m)))
            .collect()
    };
    let groups = groups
        .into_iter()
        .map(|((dataset, kind), rs)| {
            let mut by_count: BTreeMap<usize, Vec<&StudyRecord>> = BTreeMap::new();
            for r in &rs {
                by_count.entry(r.mutations).or_default().push(r);
            }
            GroupReport {
                dataset,
                kind,
                records: rs.len(),
                metrics: table(&rs),
                by_checkpoint: by_count.into_iter().map(|(c, rs)| (c, table(&rs))).collect(),
            }
        })
        .collect();
    CorrelationReport { groups }
}

/// Long-format plot data: each score min-max normalized per dataset, then
/// averaged per mutation count. Rows are `(metric, mutations, normalized)`
/// with F1 listed first.
pub fn plot_rows(records: &[StudyRecord]) -> Vec<(String, usize, f64)> {
    let columns: Vec<(&str, Box<dyn Fn(&StudyRecord) -> Option<f64>>)> = std::iter::once((
        "f1",
        Box::new(|r: &StudyRecord| r.f1) as Box<dyn Fn(&StudyRecord) -> Option<f64>>,
    ))
    .chain(Metric::ALL.iter().map(|&m| {
        (
            m.column(),
            Box::new(move |r: &StudyRecord| m.value(r)) as Box<dyn Fn(&StudyRecord) -> Option<f64>>,
        )
    }))
    .collect();

    let mut datasets: BTreeMap<&str, Vec<&StudyRecord>> = BTreeMap::new();
    for r in records {
        datasets.entry(r.dataset.as_str()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (name, get) in &columns {
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for rs in datasets.values() {
            let values: Vec<f64> = rs.iter().filter_map(|r| get(r)).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for r in rs {
                if let Some(v) = get(r) {
                    let scaled = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                    let e = sums.entry(r.mutations).or_insert((0.0, 0));
                    e.0 += scaled;
                    e.1 += 1;
                }
            }
        }
        for (mutations, (sum, count)) in sums {
            out.push((name.to_string(), mutations, sum / count as f64));
        }
    }
    out
}

pub fn plot_csv(records: &[StudyRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "mutations", "normalized_score"])
        .expect("writing to memory");
    for (metric, mutations, score) in plot_rows(records) {
        w.write_record([metric, mutations.to_string(), score.to_string()])
            .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8")
}
