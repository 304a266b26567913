use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{QueryClassifier, RouterError, Tier, TierModels};
use crate::exec::{map_ordered, Execution};

/// `ceil(chars / 4)`; never undercounts billable tokens.
pub fn estimate_tokens(query: &str) -> u64 {
    (query.chars().count() as u64).div_ceil(4)
}

/// USD per 1K input tokens, keyed by model id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable(BTreeMap<String, f64>);

impl Default for PriceTable {
    fn default() -> Self {
        PriceTable(
            [
                ("gpt-4o-mini", 0.00015),
                ("gpt-3.5-turbo", 0.001),
                ("o3-mini", 0.00125),
                ("o1", 0.015),
            ]
            .into_iter()
            .map(|(m, p)| (m.to_owned(), p))
            .collect(),
        )
    }
}

impl PriceTable {
    pub fn new(prices: BTreeMap<String, f64>) -> Result<Self, RouterError> {
        if let Some((m, &p)) = prices.iter().find(|(_, &p)| !(p > 0.0 && p.is_finite())) {
            return Err(RouterError::InvalidPrice {
                model: m.clone(),
                price: p,
            });
        }
        Ok(PriceTable(prices))
    }

    pub fn price_per_1k(&self, model: &str) -> Result<f64, RouterError> {
        self.0
            .get(model)
            .copied()
            .ok_or_else(|| RouterError::UnknownModel(model.to_owned()))
    }

    pub fn models(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(m, p)| (m.as_str(), *p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub query_id: String,
    pub route: Tier,
    /// Input tokens billed per model for this query.
    pub tokens_per_model: BTreeMap<String, u64>,
    pub total_usd: f64,
}

impl CostRecord {
    fn from_tokens(
        query_id: &str,
        route: Tier,
        tokens_per_model: BTreeMap<String, u64>,
        table: &PriceTable,
    ) -> Result<Self, RouterError> {
        let mut total = 0.0;
        for (model, &tokens) in &tokens_per_model {
            total += tokens as f64 / 1000.0 * table.price_per_1k(model)?;
        }
        Ok(CostRecord {
            query_id: query_id.to_owned(),
            route,
            tokens_per_model,
            total_usd: total,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostOptions {
    pub models: TierModels,
    /// Bill a classification pass over the query on `router_model`.
    pub include_router_overhead: bool,
    pub router_model: String,
    pub baseline_model: String,
}

impl Default for CostOptions {
    fn default() -> Self {
        CostOptions {
            models: TierModels::default(),
            include_router_overhead: false,
            router_model: "gpt-4o-mini".into(),
            baseline_model: "o1".into(),
        }
    }
}

/// Cost of answering `query` on the tier's model, plus the router pass when
/// overhead is included.
pub fn cost(
    query_id: &str,
    query: &str,
    route: Tier,
    table: &PriceTable,
    options: &CostOptions,
) -> Result<CostRecord, RouterError> {
    let tokens = estimate_tokens(query);
    let mut per_model = BTreeMap::new();
    *per_model
        .entry(options.models.model(route).to_owned())
        .or_insert(0) += tokens;
    if options.include_router_overhead {
        *per_model.entry(options.router_model.clone()).or_insert(0) += tokens;
    }
    CostRecord::from_tokens(query_id, route, per_model, table)
}

/// Cost of sending every query to the baseline model, no router.
pub fn baseline_cost(
    query_id: &str,
    query: &str,
    table: &PriceTable,
    options: &CostOptions,
) -> Result<CostRecord, RouterError> {
    let per_model = BTreeMap::from([(options.baseline_model.clone(), estimate_tokens(query))]);
    CostRecord::from_tokens(query_id, Tier::HighRisk, per_model, table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCost {
    pub query_id: String,
    pub tier: Tier,
    pub tokens: u64,
    pub tiered_usd: f64,
    pub baseline_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStudy {
    pub queries: usize,
    pub include_router_overhead: bool,
    pub total_tiered: f64,
    pub total_baseline: f64,
    pub savings: f64,
    /// `1 - total_tiered / total_baseline`.
    pub relative_reduction: f64,
    pub per_query: Vec<QueryCost>,
}

/// Classifies and prices every query both ways. Query ids are `q001`, `q002`, ...
pub fn cost_study(
    queries: &[String],
    table: &PriceTable,
    classifier: &dyn QueryClassifier,
    options: &CostOptions,
    exec: Execution,
) -> Result<CostStudy, RouterError> {
    if queries.is_empty() {
        return Err(RouterError::EmptyInput);
    }
    let indexed: Vec<(usize, &String)> = queries.iter().enumerate().collect();
    let rows = map_ordered(exec, &indexed, |(i, q)| -> Result<QueryCost, RouterError> {
        let id = format!("q{:03}", i + 1);
        let tier = classifier.classify(q);
        let tiered = cost(&id, q, tier, table, options)?;
        let base = baseline_cost(&id, q, table, options)?;
        Ok(QueryCost {
            query_id: id,
            tier,
            tokens: estimate_tokens(q),
            tiered_usd: tiered.total_usd,
            baseline_usd: base.total_usd,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let total_tiered: f64 = rows.iter().map(|r| r.tiered_usd).sum();
    let total_baseline: f64 = rows.iter().map(|r| r.baseline_usd).sum();
    let relative_reduction = if total_baseline > 0.0 {
        1.0 - total_tiered / total_baseline
    } else {
        0.0
    };
    Ok(CostStudy {
        queries: rows.len(),
        include_router_overhead: options.include_router_overhead,
        total_tiered,
        total_baseline,
        savings: total_baseline - total_tiered,
        relative_reduction,
        per_query: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::HeuristicClassifier;
    use proptest::prelude::*;

    struct Always(Tier);
    impl QueryClassifier for Always {
        fn classify(&self, _: &str) -> Tier {
            self.0
        }
    }

    #[test]
    fn token_estimates() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens(&"a".repeat(400)), 100);
        assert_eq!(estimate_tokens(&"a".repeat(401)), 101);
        assert_eq!(estimate_tokens("hi"), 1);
        // characters, not bytes
        assert_eq!(estimate_tokens("ééééé"), 2);
    }

    #[test]
    fn reference_costs() {
        let t = PriceTable::default();
        let o = CostOptions::default();
        let q = "a".repeat(400);
        let simple = cost("q", &q, Tier::Simple, &t, &o).unwrap();
        assert!((simple.total_usd - 0.000015).abs() < 1e-12);
        assert_eq!(simple.tokens_per_model["gpt-4o-mini"], 100);
        let base = baseline_cost("q", &q, &t, &o).unwrap();
        assert!((base.total_usd - 0.0015).abs() < 1e-12);
        for tier in [Tier::Simple, Tier::Reasoning, Tier::HighRisk] {
            assert_eq!(cost("q", "", tier, &t, &o).unwrap().total_usd, 0.0);
        }
    }

    #[test]
    fn table_prices_verbatim() {
        let t = PriceTable::default();
        assert_eq!(t.price_per_1k("gpt-4o-mini").unwrap(), 0.00015);
        assert_eq!(t.price_per_1k("gpt-3.5-turbo").unwrap(), 0.001);
        assert_eq!(t.price_per_1k("o3-mini").unwrap(), 0.00125);
        assert_eq!(t.price_per_1k("o1").unwrap(), 0.015);
        assert_eq!(
            t.price_per_1k("gpt-4o"),
            Err(RouterError::UnknownModel("gpt-4o".into()))
        );
        assert!(PriceTable::new(BTreeMap::from([("x".to_string(), 0.0)])).is_err());
    }

    #[test]
    fn overhead_adds_router_pass() {
        let t = PriceTable::default();
        let o = CostOptions {
            include_router_overhead: true,
            ..CostOptions::default()
        };
        let q = "a".repeat(400);
        let r = cost("q", &q, Tier::Reasoning, &t, &o).unwrap();
        assert!((r.total_usd - (0.1 * 0.00125 + 0.1 * 0.00015)).abs() < 1e-12);
        let s = cost("q", &q, Tier::Simple, &t, &o).unwrap();
        assert_eq!(s.tokens_per_model["gpt-4o-mini"], 200);
        let bad = CostOptions {
            router_model: "gpt-4o".into(),
            ..o
        };
        assert!(matches!(
            cost("q", &q, Tier::Simple, &t, &bad),
            Err(RouterError::UnknownModel(_))
        ));
    }

    #[test]
    fn study_reference_cases() {
        let t = PriceTable::default();
        let o = CostOptions::default();
        let qs: Vec<String> = vec!["a".repeat(400), "b".repeat(123)];
        let s = cost_study(&qs, &t, &Always(Tier::HighRisk), &o, Execution::Sequential).unwrap();
        assert_eq!(s.relative_reduction, 0.0);
        let one = vec!["a".repeat(400)];
        let s = cost_study(&one, &t, &Always(Tier::Simple), &o, Execution::Sequential).unwrap();
        assert!((s.relative_reduction - 0.99).abs() < 1e-12);
        assert!(matches!(
            cost_study(&[], &t, &Always(Tier::Simple), &o, Execution::Sequential),
            Err(RouterError::EmptyInput)
        ));
    }

    #[test]
    fn parallel_and_sequential_studies_match() {
        let t = PriceTable::default();
        let o = CostOptions::default();
        let qs: Vec<String> = (0..200).map(|i| format!("summarize week {i} ") + &"x".repeat(i)).collect();
        let c = HeuristicClassifier::default();
        let a = cost_study(&qs, &t, &c, &o, Execution::Sequential).unwrap();
        let b = cost_study(&qs, &t, &c, &o, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn cost_is_linear_in_tokens(n in 0usize..2000, tier in prop::sample::select(vec![Tier::Simple, Tier::Reasoning, Tier::HighRisk])) {
            let t = PriceTable::default();
            let o = CostOptions::default();
            let one = cost("q", &"a".repeat(4 * n), tier, &t, &o).unwrap().total_usd;
            let two = cost("q", &"a".repeat(8 * n), tier, &t, &o).unwrap().total_usd;
            prop_assert!((two - 2.0 * one).abs() < 1e-15);
        }

        #[test]
        fn tiered_never_exceeds_baseline(q in "\\PC{0,300}") {
            let t = PriceTable::default();
            let o = CostOptions::default();
            let tier = HeuristicClassifier::default().classify(&q);
            let tiered = cost("q", &q, tier, &t, &o).unwrap().total_usd;
            let base = baseline_cost("q", &q, &t, &o).unwrap().total_usd;
            prop_assert!(tiered <= base);
        }
    }
}
