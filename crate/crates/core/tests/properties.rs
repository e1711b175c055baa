use proptest::prelude::*;

use clues_core::analysis::{direction_table, lexical_diversity, ols_robust, semantic_diversity, Design, RobustKind};
use clues_core::knowledge::{HashedEmbedder, KnowledgeIndex};
use clues_core::profiles::PopulationKind;
use clues_core::runner::{Effect, Pct};
use clues_core::{Scenario, VignetteId};

fn vectors(dim: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), 1..n)
        .prop_filter("nonzero rows", |vs| vs.iter().all(|v| v.iter().any(|x| x.abs() > 1e-6)))
}

proptest! {
    #[test]
    fn retrieval_is_sorted_bounded_and_distinct(
        rows in vectors(8, 60),
        query in prop::collection::vec(-1.0f64..1.0, 8).prop_filter("nonzero", |q| q.iter().any(|x| x.abs() > 1e-6)),
        k in 1usize..80,
    ) {
        let rows: Vec<(String, Vec<f64>)> = rows.into_iter().enumerate().map(|(i, v)| (format!("c{i:03}"), v)).collect();
        let n = rows.len();
        let index = KnowledgeIndex::from_rows("t", 8, None, rows).unwrap();
        let hits = index.retrieve(&query, k).unwrap();
        prop_assert_eq!(hits.len(), k.min(n));
        for w in hits.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].chunk_id < w[1].chunk_id));
        }
        prop_assert!(hits.iter().all(|h| (-1.0..=1.0).contains(&h.score)));
        let mut ids: Vec<&str> = hits.iter().map(|h| h.chunk_id.as_str()).collect();
        ids.dedup();
        prop_assert_eq!(ids.len(), hits.len());
    }

    #[test]
    fn direction_counts_partition_every_cell(
        deltas in prop::collection::vec((-50i64..50, -50i64..50, 0usize..4), 1..200),
        tol in 0i64..30,
    ) {
        let vignettes = VignetteId::standard();
        let effects: Vec<Effect> = deltas
            .iter()
            .enumerate()
            .map(|(i, (pi, u, v))| Effect {
                repeat: 0,
                kind: PopulationKind::Household,
                agent_id: format!("h{i}"),
                vignette: vignettes[*v].clone(),
                scenario: Scenario::Rise,
                d_inflation: Pct(*pi),
                d_unemployment: Pct(*u),
            })
            .collect();
        let table = direction_table(&effects, Pct(tol));
        let total: usize = table.cells.values().map(|c| c.n()).sum();
        prop_assert_eq!(total, 2 * effects.len());
        for c in table.cells.values() {
            let (f, s, r) = c.shares();
            prop_assert!((f + s + r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lexical_measures_stay_in_range(words in prop::collection::vec("[a-e]{1,3}", 2..80)) {
        let l = lexical_diversity(&[words.join(" ")]).unwrap();
        prop_assert!(l.ttr > 0.0 && l.ttr <= 1.0);
        let h = l.herdan.unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&h));
    }

    #[test]
    fn semantic_score_is_bounded(docs in prop::collection::vec("[a-f]{2,4}( [a-f]{2,4}){0,6}\\.", 2..8)) {
        // Colliding tokens with opposite signs can cancel to a zero vector,
        // which is reported rather than scored.
        let Ok(s) = semantic_diversity(&docs, &HashedEmbedder::new(32)) else { return Ok(()) };
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&s.score));
        prop_assert!((s.score - (1.0 - s.mean_similarity)).abs() < 1e-15);
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_the_design(
        rows in prop::collection::vec((0u8..2, 0u8..2, -10.0f64..10.0), 12..60),
    ) {
        let n = rows.len();
        let d1: Vec<f64> = rows.iter().map(|r| f64::from(r.0)).collect();
        let d2: Vec<f64> = rows.iter().map(|r| f64::from(r.1)).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let mut design = Design::with_intercept(n);
        design.push("d1", d1.clone()).unwrap();
        design.push("d2", d2.clone()).unwrap();
        // Degenerate dummy patterns are rank deficient and rejected.
        let Ok(fit) = ols_robust(&y, &design, RobustKind::Hc1) else { return Ok(()) };
        let resid: Vec<f64> = (0..n)
            .map(|i| y[i] - fit.coefficients[0] - fit.coefficients[1] * d1[i] - fit.coefficients[2] * d2[i])
            .collect();
        for col in [vec![1.0; n], d1, d2] {
            let dot: f64 = col.iter().zip(&resid).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() < 1e-8, "Xᵀe = {}", dot);
        }
        prop_assert!((0.0..=1.0).contains(&fit.r_squared));
        prop_assert!(fit.std_errors.iter().all(|s| s.is_finite() && *s >= 0.0));
    }
}
