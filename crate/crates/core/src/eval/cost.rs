//! Cost study runner: prices a query set through the tiered router and the
//! single-model baseline, with and without the router's own pass.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::exec::Execution;
use crate::router::{cost_study, CostOptions, CostStudy, PriceTable, QueryClassifier};

const BUNDLED_QUERIES: &str = include_str!("../../data/queries.txt");

/// Parses a query file: one query per line, `#` comments and blanks skipped.
pub fn parse_queries(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// The 30-query sample shipped with the crate.
pub fn bundled_queries() -> Vec<String> {
    parse_queries(BUNDLED_QUERIES)
}

/// Published totals for the original (unreleased) query set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedCost {
    pub total_tiered_usd: f64,
    pub total_baseline_usd: f64,
    pub relative_reduction_pct: f64,
}

impl Default for PublishedCost {
    fn default() -> Self {
        PublishedCost {
            total_tiered_usd: 0.0024481,
            total_baseline_usd: 0.0056363,
            relative_reduction_pct: 56.57,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStudyReport {
    pub queries: usize,
    pub tier_counts: BTreeMap<String, usize>,
    pub without_overhead: CostStudy,
    pub with_overhead: CostStudy,
    pub reference: PublishedCost,
}

pub fn run_cost_study(
    queries: &[String],
    table: &PriceTable,
    classifier: &dyn QueryClassifier,
    options: &CostOptions,
    exec: Execution,
) -> Result<CostStudyReport, EvalError> {
    let study = |overhead: bool| {
        let opts = CostOptions {
            include_router_overhead: overhead,
            ..options.clone()
        };
        cost_study(queries, table, classifier, &opts, exec).map_err(|e| EvalError::Config(e.to_string()))
    };
    let without_overhead = study(false)?;
    let with_overhead = study(true)?;
    let mut tier_counts = BTreeMap::new();
    for q in &without_overhead.per_query {
        *tier_counts.entry(q.tier.as_str().to_owned()).or_insert(0) += 1;
    }
    Ok(CostStudyReport {
        queries: without_overhead.queries,
        tier_counts,
        without_overhead,
        with_overhead,
        reference: PublishedCost::default(),
    })
}

impl CostStudyReport {
    pub fn files(&self) -> Result<Vec<(&'static str, Vec<u8>)>, EvalError> {
        let io = |e: &dyn std::fmt::Display| EvalError::Io(e.to_string());
        let mut json = serde_json::to_vec_pretty(self).map_err(|e| io(&e))?;
        json.push(b'\n');
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["query_id", "tier", "tokens", "tiered_usd", "baseline_usd", "tiered_with_overhead_usd"])
            .map_err(|e| io(&e))?;
        for (a, b) in self.without_overhead.per_query.iter().zip(&self.with_overhead.per_query) {
            w.write_record([
                a.query_id.clone(),
                a.tier.as_str().to_owned(),
                a.tokens.to_string(),
                a.tiered_usd.to_string(),
                a.baseline_usd.to_string(),
                b.tiered_usd.to_string(),
            ])
            .map_err(|e| io(&e))?;
        }
        let csv = w.into_inner().map_err(|e| io(&e))?;
        Ok(vec![("cost_study.json", json), ("cost_per_query.csv", csv)])
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), EvalError> {
        fs::create_dir_all(out_dir).map_err(|e| EvalError::Io(e.to_string()))?;
        for (name, bytes) in self.files()? {
            fs::write(out_dir.join(name), bytes).map_err(|e| EvalError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let line = |label: &str, s: &CostStudy| {
            format!(
                "{label:<22} tiered {:.7} USD  baseline {:.7} USD  reduction {:.2}%\n",
                s.total_tiered,
                s.total_baseline,
                100.0 * s.relative_reduction
            )
        };
        let tiers: Vec<String> = self.tier_counts.iter().map(|(t, n)| format!("{t}={n}")).collect();
        format!(
            "queries {} ({})\n{}{}{:<22} tiered {:.7} USD  baseline {:.7} USD  reduction {:.2}%\n",
            self.queries,
            tiers.join(", "),
            line("no router overhead", &self.without_overhead),
            line("with router overhead", &self.with_overhead),
            "published",
            self.reference.total_tiered_usd,
            self.reference.total_baseline_usd,
            self.reference.relative_reduction_pct,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::{estimate_tokens, HeuristicClassifier};

    #[test]
    fn bundled_sample_shape() {
        let q = bundled_queries();
        assert_eq!(q.len(), 30);
        let r = run_cost_study(
            &q,
            &PriceTable::default(),
            &HeuristicClassifier::default(),
            &CostOptions::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(r.tier_counts["simple"], 12);
        assert_eq!(r.tier_counts["reasoning"], 10);
        assert_eq!(r.tier_counts["high_risk"], 8);
        assert!(r.without_overhead.relative_reduction > 0.0);
        assert!(r.with_overhead.relative_reduction > 0.0);
    }

    #[test]
    fn baseline_total_matches_hand_sum() {
        let q = bundled_queries();
        let r = run_cost_study(
            &q,
            &PriceTable::default(),
            &HeuristicClassifier::default(),
            &CostOptions::default(),
            Execution::Parallel,
        )
        .unwrap();
        let tokens: u64 = q.iter().map(|s| s.chars().count().div_ceil(4) as u64).sum();
        assert_eq!(tokens, q.iter().map(|s| estimate_tokens(s)).sum::<u64>());
        let expect = tokens as f64 / 1000.0 * 0.015;
        assert!((r.without_overhead.total_baseline - expect).abs() < 1e-12);
        // Router overhead adds one gpt-4o-mini pass per query.
        let extra = tokens as f64 / 1000.0 * 0.00015;
        assert!((r.with_overhead.total_tiered - r.without_overhead.total_tiered - extra).abs() < 1e-12);
    }

    #[test]
    fn comments_and_blanks_skipped() {
        assert_eq!(parse_queries("# x\n\n a \nb\n"), ["a", "b"]);
    }

    #[test]
    fn files_are_deterministic() {
        let run = |exec| {
            run_cost_study(
                &bundled_queries(),
                &PriceTable::default(),
                &HeuristicClassifier::default(),
                &CostOptions::default(),
                exec,
            )
            .unwrap()
            .files()
            .unwrap()
        };
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
    }
}
