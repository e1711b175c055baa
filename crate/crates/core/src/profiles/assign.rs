//! Vignette assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Population, PopulationKind, ProfileError};
use crate::rng::SeedTree;
use crate::vignette::VignetteId;

/// Which vignettes each agent answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Assignment {
    /// Households: exactly one vignette per agent.
    PerAgent {
        vignettes: Vec<VignetteId>,
        /// (agent id, vignette) in population order.
        agents: Vec<(String, VignetteId)>,
    },
    /// Experts: every agent answers every vignette.
    FullCross { vignettes: Vec<VignetteId>, agents: Vec<String> },
}

impl Assignment {
    pub fn vignettes(&self) -> &[VignetteId] {
        match self {
            Assignment::PerAgent { vignettes, .. } | Assignment::FullCross { vignettes, .. } => vignettes,
        }
    }

    /// All (agent id, vignette) pairs, grouped by vignette in vignette order
    /// and in population order within a vignette.
    pub fn pairs(&self) -> Vec<(&str, &VignetteId)> {
        let mut out = Vec::new();
        match self {
            Assignment::PerAgent { vignettes, agents } => {
                for v in vignettes {
                    out.extend(agents.iter().filter(|(_, a)| a == v).map(|(id, a)| (id.as_str(), a)));
                }
            }
            Assignment::FullCross { vignettes, agents } => {
                for v in vignettes {
                    out.extend(agents.iter().map(|id| (id.as_str(), v)));
                }
            }
        }
        out
    }

    /// Agent ids answering `vignette`, in population order.
    pub fn agents_for(&self, vignette: &VignetteId) -> Vec<&str> {
        self.pairs().into_iter().filter(|(_, v)| *v == vignette).map(|(id, _)| id).collect()
    }

    pub fn counts(&self) -> BTreeMap<VignetteId, usize> {
        let mut counts: BTreeMap<VignetteId, usize> = self.vignettes().iter().map(|v| (v.clone(), 0)).collect();
        for (_, v) in self.pairs() {
            *counts.get_mut(v).expect("assigned vignette is listed") += 1;
        }
        counts
    }
}

/// Assigns vignettes to agents.
///
/// Households are shuffled with a seeded generator and dealt round-robin over
/// a seeded permutation of the vignettes, so per-vignette counts differ by at
/// most one and the remainder lands on seed-determined vignettes. Experts get
/// every vignette.
pub fn assign_vignettes(pop: &Population, vignettes: &[VignetteId], seed: u64) -> Result<Assignment, ProfileError> {
    if vignettes.is_empty() {
        return Err(ProfileError::NoVignettes);
    }
    let ids: Vec<String> = pop.ids().into_iter().map(str::to_string).collect();
    match pop.kind() {
        PopulationKind::Expert => Ok(Assignment::FullCross { vignettes: vignettes.to_vec(), agents: ids }),
        PopulationKind::Household => {
            let tree = SeedTree::new(seed).child("assign-vignettes");
            let mut order: Vec<usize> = (0..ids.len()).collect();
            order.shuffle(&mut tree.child("agents").rng());
            let mut deal: Vec<&VignetteId> = vignettes.iter().collect();
            deal.shuffle(&mut tree.child("vignettes").rng());

            let mut slot = vec![None; ids.len()];
            for (turn, &agent) in order.iter().enumerate() {
                slot[agent] = Some(deal[turn % deal.len()].clone());
            }
            let agents = ids
                .into_iter()
                .zip(slot)
                .map(|(id, v)| (id, v.expect("every agent dealt")))
                .collect();
            Ok(Assignment::PerAgent { vignettes: vignettes.to_vec(), agents })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{generate_synthetic_households, HouseholdMarginals};

    fn households(n: usize) -> Population {
        generate_synthetic_households(n, 3, &HouseholdMarginals::default()).unwrap()
    }

    #[test]
    fn five_over_four_is_2111() {
        let a = assign_vignettes(&households(5), &VignetteId::standard(), 11).unwrap();
        let mut counts: Vec<usize> = a.counts().into_values().collect();
        counts.sort_unstable();
        assert_eq!(counts, vec![1, 1, 1, 2]);
    }

    #[test]
    fn deterministic_in_seed() {
        let pop = households(40);
        let v = VignetteId::standard();
        assert_eq!(assign_vignettes(&pop, &v, 5).unwrap(), assign_vignettes(&pop, &v, 5).unwrap());
        assert_ne!(assign_vignettes(&pop, &v, 5).unwrap(), assign_vignettes(&pop, &v, 6).unwrap());
    }

    #[test]
    fn experts_get_full_cross() {
        let pop = crate::profiles::generate_synthetic_experts(15, 2, &Default::default()).unwrap();
        let a = assign_vignettes(&pop, &VignetteId::standard(), 1).unwrap();
        assert_eq!(a.pairs().len(), 60);
        assert!(a.counts().values().all(|&c| c == 15));
    }

    #[test]
    fn empty_vignette_list_errors() {
        assert!(matches!(assign_vignettes(&households(3), &[], 1), Err(ProfileError::NoVignettes)));
    }

    proptest::proptest! {
        #[test]
        fn counts_differ_by_at_most_one(n in 1usize..300, k in 1usize..6, seed in proptest::prelude::any::<u64>()) {
            let vignettes: Vec<VignetteId> = (0..k).map(|i| VignetteId::new(format!("v{i}"))).collect();
            let a = assign_vignettes(&households(n), &vignettes, seed).unwrap();
            let counts: Vec<usize> = a.counts().into_values().collect();
            let lo = *counts.iter().min().unwrap();
            let hi = *counts.iter().max().unwrap();
            proptest::prop_assert!(hi - lo <= 1);
            proptest::prop_assert_eq!(counts.iter().sum::<usize>(), n);
        }
    }
}
