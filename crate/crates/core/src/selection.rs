//! Candidate-model constraint filtering and efficiency-score ranking.
//!
//! The score normalizes each model against the pool it is ranked within:
//! `E = l1 * acc/max(acc) + l2 * min(flops)/flops + l3 * min(params)/params`.
//! Accuracy is rewarded relative to the best in the pool; compute and size
//! are rewarded for being close to the pool minimum.

use crate::error::{Error, Result};

pub const PARAM_LIMIT: f64 = 1e7;
pub const FLOP_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateModel {
    pub name: String,
    pub family: String,
    /// Reference-task top-1 accuracy in percent.
    pub top1_acc: f64,
    pub params: f64,
    pub flops: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for EfficiencyWeights {
    fn default() -> Self {
        EfficiencyWeights { lambda1: 0.5, lambda2: 0.25, lambda3: 0.25 }
    }
}

impl EfficiencyWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let w = EfficiencyWeights { lambda1, lambda2, lambda3 };
        if lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0 {
            return Err(Error::Parameter("efficiency weights must be non-negative".into()));
        }
        if lambda1 + lambda2 + lambda3 <= 0.0 {
            return Err(Error::Parameter("at least one efficiency weight must be positive".into()));
        }
        Ok(w)
    }
}

/// Keep models satisfying the lightweight constraint: params under 10M or
/// FLOPs under 1G.
pub fn constraint_filter(pool: &[CandidateModel]) -> Vec<CandidateModel> {
    pool.iter()
        .filter(|m| m.params < PARAM_LIMIT || m.flops < FLOP_LIMIT)
        .cloned()
        .collect()
}

fn validate_pool(pool: &[CandidateModel]) -> Result<(f64, f64, f64)> {
    if pool.is_empty() {
        return Err(Error::Parameter("empty candidate pool".into()));
    }
    for m in pool {
        if !(m.top1_acc > 0.0 && m.top1_acc <= 100.0) || m.params <= 0.0 || m.flops <= 0.0 {
            return Err(Error::Parameter(format!("candidate {} has invalid fields", m.name)));
        }
    }
    let max_acc = pool.iter().map(|m| m.top1_acc).fold(f64::NEG_INFINITY, f64::max);
    let min_flops = pool.iter().map(|m| m.flops).fold(f64::INFINITY, f64::min);
    let min_params = pool.iter().map(|m| m.params).fold(f64::INFINITY, f64::min);
    Ok((max_acc, min_flops, min_params))
}

pub fn efficiency_score(
    model: &CandidateModel,
    pool: &[CandidateModel],
    w: &EfficiencyWeights,
) -> Result<f64> {
    let (max_acc, min_flops, min_params) = validate_pool(pool)?;
    Ok(w.lambda1 * (model.top1_acc / max_acc)
        + w.lambda2 * (min_flops / model.flops)
        + w.lambda3 * (min_params / model.params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedModel {
    pub model: CandidateModel,
    pub score: f64,
}

/// Score the pool, sort by score descending (ties: lower FLOPs, then lower
/// params, then name), keep only the best entry per family, truncate to
/// `top_k`.
pub fn rank_and_dedupe(
    pool: &[CandidateModel],
    w: &EfficiencyWeights,
    top_k: usize,
) -> Result<Vec<RankedModel>> {
    if top_k == 0 {
        return Err(Error::Parameter("top_k must be at least 1".into()));
    }
    validate_pool(pool)?;
    let mut ranked: Vec<RankedModel> = pool
        .iter()
        .map(|m| {
            Ok(RankedModel { model: m.clone(), score: efficiency_score(m, pool, w)? })
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.model.flops.partial_cmp(&b.model.flops).unwrap())
            .then(a.model.params.partial_cmp(&b.model.params).unwrap())
            .then(a.model.name.cmp(&b.model.name))
    });
    let mut seen = std::collections::HashSet::new();
    ranked.retain(|r| seen.insert(r.model.family.clone()));
    ranked.truncate(top_k);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(name: &str, family: &str, acc: f64, params: f64, flops: f64) -> CandidateModel {
        CandidateModel {
            name: name.into(),
            family: family.into(),
            top1_acc: acc,
            params,
            flops,
        }
    }

    #[test]
    fn filter_keeps_either_criterion() {
        let pool = vec![
            m("small-params", "a", 70.0, 9e6, 5e9),
            m("small-flops", "b", 70.0, 23e6, 0.5e9),
            m("too-big", "c", 70.0, 12e6, 2e9),
        ];
        let kept = constraint_filter(&pool);
        let names: Vec<&str> = kept.iter().map(|k| k.name.as_str()).collect();
        assert_eq!(names, vec!["small-params", "small-flops"]);
    }

    #[test]
    fn dominant_model_scores_one() {
        let pool = vec![
            m("best", "a", 80.0, 1e6, 1e8),
            m("worse", "b", 60.0, 2e6, 3e8),
        ];
        let w = EfficiencyWeights::default();
        let score = efficiency_score(&pool[0], &pool, &w).unwrap();
        assert!((score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_two_model_pool() {
        // A: half of B's accuracy ratio terms worked through by hand.
        let pool = vec![
            m("A", "a", 80.0, 4e6, 2e9),
            m("B", "b", 40.0, 1e6, 1e9),
        ];
        let w = EfficiencyWeights::default();
        let ea = efficiency_score(&pool[0], &pool, &w).unwrap();
        let eb = efficiency_score(&pool[1], &pool, &w).unwrap();
        assert_eq!(ea, 0.6875);
        assert_eq!(eb, 0.75);
    }

    #[test]
    fn score_invariant_under_common_rescaling() {
        let pool = vec![
            m("x", "a", 75.0, 3e6, 4e8),
            m("y", "b", 65.0, 1e6, 9e8),
            m("z", "c", 85.0, 7e6, 2e8),
        ];
        let w = EfficiencyWeights::new(0.4, 0.35, 0.25).unwrap();
        let base: Vec<f64> =
            pool.iter().map(|mm| efficiency_score(mm, &pool, &w).unwrap()).collect();
        for k in [0.001, 3.0, 1e6] {
            let scaled_flops: Vec<CandidateModel> = pool
                .iter()
                .map(|mm| CandidateModel { flops: mm.flops * k, ..mm.clone() })
                .collect();
            let scaled_params: Vec<CandidateModel> = pool
                .iter()
                .map(|mm| CandidateModel { params: mm.params * k, ..mm.clone() })
                .collect();
            for (i, b) in base.iter().enumerate() {
                let sf = efficiency_score(&scaled_flops[i], &scaled_flops, &w).unwrap();
                let sp = efficiency_score(&scaled_params[i], &scaled_params, &w).unwrap();
                assert!((sf - b).abs() < 1e-12);
                assert!((sp - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dominated_addition_preserves_scores() {
        let pool = vec![
            m("x", "a", 75.0, 3e6, 4e8),
            m("y", "b", 65.0, 1e6, 2e8),
        ];
        let w = EfficiencyWeights::default();
        let base: Vec<f64> =
            pool.iter().map(|mm| efficiency_score(mm, &pool, &w).unwrap()).collect();
        let mut bigger = pool.clone();
        bigger.push(m("dominated", "c", 50.0, 8e6, 9e8));
        for (i, b) in base.iter().enumerate() {
            let s = efficiency_score(&pool[i], &bigger, &w).unwrap();
            assert!((s - b).abs() < 1e-12);
        }
    }

    #[test]
    fn family_dedupe_keeps_higher_scorer() {
        let pool = vec![
            m("shuffle-v2-x1", "shufflenet", 69.0, 2.3e6, 1.5e8),
            m("shuffle-v2-x05", "shufflenet", 60.0, 1.4e6, 0.4e8),
            m("other", "other", 71.0, 3.5e6, 3e8),
        ];
        let ranked = rank_and_dedupe(&pool, &EfficiencyWeights::default(), 10).unwrap();
        let families: Vec<&str> = ranked.iter().map(|r| r.model.family.as_str()).collect();
        assert_eq!(families.len(), 2);
        assert_eq!(
            ranked.iter().filter(|r| r.model.family == "shufflenet").count(),
            1
        );
        // The surviving shufflenet entry is its family's best scorer.
        let kept = ranked.iter().find(|r| r.model.family == "shufflenet").unwrap();
        let e_kept = efficiency_score(&kept.model, &pool, &EfficiencyWeights::default()).unwrap();
        for mm in &pool {
            if mm.family == "shufflenet" {
                let e = efficiency_score(mm, &pool, &EfficiencyWeights::default()).unwrap();
                assert!(e <= e_kept + 1e-12);
            }
        }
    }

    #[test]
    fn pool_of_one_ranks_itself() {
        let pool = vec![m("only", "a", 70.0, 1e6, 1e8)];
        let ranked = rank_and_dedupe(&pool, &EfficiencyWeights::default(), 5).unwrap();
        assert_eq!(ranked.len(), 1);
        assert!((ranked[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_matches_brute_force_sort() {
        let mut rng = crate::rng::Rng::new(1234);
        let pool: Vec<CandidateModel> = (0..20)
            .map(|i| {
                m(
                    &format!("model-{i}"),
                    &format!("family-{i}"),
                    rng.uniform_in(40.0, 90.0),
                    rng.uniform_in(0.5e6, 9e6),
                    rng.uniform_in(0.5e8, 9e8),
                )
            })
            .collect();
        let w = EfficiencyWeights::default();
        let ranked = rank_and_dedupe(&pool, &w, 20).unwrap();

        let mut oracle: Vec<(f64, String)> = pool
            .iter()
            .map(|mm| (efficiency_score(mm, &pool, &w).unwrap(), mm.name.clone()))
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let got: Vec<&str> = ranked.iter().map(|r| r.model.name.as_str()).collect();
        let want: Vec<&str> = oracle.iter().map(|o| o.1.as_str()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn scores_bounded_by_weight_sum() {
        let pool = vec![
            m("x", "a", 75.0, 3e6, 4e8),
            m("y", "b", 65.0, 1e6, 2e8),
            m("z", "c", 85.0, 7e6, 8e8),
        ];
        let w = EfficiencyWeights::new(0.6, 0.3, 0.1).unwrap();
        for mm in &pool {
            let e = efficiency_score(mm, &pool, &w).unwrap();
            assert!(e > 0.0 && e <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(efficiency_score(
            &m("a", "a", 70.0, 1e6, 1e8),
            &[],
            &EfficiencyWeights::default()
        )
        .is_err());
        assert!(EfficiencyWeights::new(-0.1, 0.5, 0.5).is_err());
        assert!(EfficiencyWeights::new(0.0, 0.0, 0.0).is_err());
    }
}
