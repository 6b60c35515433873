//! Subject-disjoint train/validation/test splits with class-ratio balancing.
//!
//! Subjects are first packed greedily into `K = 1 / test_fraction` groups
//! whose per-class counts track the global class ratios; fold `f` tests on
//! group `f`. Validation subjects are then picked greedily from the remaining
//! groups, again tracking class ratios, and everything left trains.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::DatasetManifest;
use crate::error::{config, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub fold_index: usize,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    /// Manifest indices of the train, validation and test sets, in manifest order.
    pub fn indices(&self, manifest: &DatasetManifest) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let pos: HashMap<String, usize> = manifest
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.image_id(), i))
            .collect();
        let resolve = |ids: &[String]| {
            let mut v: Vec<usize> = ids.iter().filter_map(|id| pos.get(id).copied()).collect();
            v.sort_unstable();
            v
        };
        (resolve(&self.train), resolve(&self.val), resolve(&self.test))
    }
}

struct Subject {
    counts: Vec<f64>,
    members: Vec<usize>,
}

fn sq_dev(current: &[f64], add: &[f64], target: &[f64]) -> f64 {
    current
        .iter()
        .zip(add)
        .zip(target)
        .map(|((c, a), t)| (c + a - t).powi(2))
        .sum()
}

pub fn split_subject_disjoint(
    manifest: &DatasetManifest,
    fractions: (f64, f64, f64),
    fold: usize,
    seed: u64,
) -> Result<SplitAssignment> {
    let (f_train, f_val, f_test) = fractions;
    if [f_train, f_val, f_test].iter().any(|f| !(f.is_finite() && *f > 0.0))
        || (f_train + f_val + f_test - 1.0).abs() > 1e-9
    {
        return config(format!("split fractions {fractions:?} must be positive and sum to 1"));
    }
    let groups_f = 1.0 / f_test;
    let groups = groups_f.round() as usize;
    if (groups_f - groups as f64).abs() > 1e-6 || groups < 2 {
        return config(format!("test fraction {f_test} must be 1/K for an integer K >= 2"));
    }
    if fold >= groups {
        return config(format!("fold {fold} out of range for {groups} folds"));
    }
    let levels = manifest.levels;

    let mut by_subject: BTreeMap<&str, Subject> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        let s = by_subject.entry(&e.subject_id).or_insert_with(|| Subject {
            counts: vec![0.0; levels],
            members: Vec::new(),
        });
        s.counts[e.label - 1] += 1.0;
        s.members.push(i);
    }
    let mut subjects: Vec<Subject> = by_subject.into_values().collect();
    if subjects.len() < groups.max(3) {
        return config(format!(
            "{} subjects cannot form {groups} disjoint folds plus a validation set",
            subjects.len()
        ));
    }
    subjects.shuffle(&mut rng::rng_for(seed, "split-subjects", 0));
    subjects.sort_by(|a, b| {
        let (sa, sb): (f64, f64) = (a.counts.iter().sum(), b.counts.iter().sum());
        sb.partial_cmp(&sa).unwrap()
    });

    let totals: Vec<f64> = manifest.class_counts.iter().map(|&c| c as f64).collect();

    // Pack subjects into K class-balanced groups.
    let group_target: Vec<f64> = totals.iter().map(|t| t / groups as f64).collect();
    let mut group_counts = vec![vec![0.0; levels]; groups];
    let mut group_of = vec![0usize; subjects.len()];
    for (si, s) in subjects.iter().enumerate() {
        let zero = vec![0.0; levels];
        let best = (0..groups)
            .min_by(|&a, &b| {
                let da = sq_dev(&group_counts[a], &s.counts, &group_target)
                    - sq_dev(&group_counts[a], &zero, &group_target);
                let db = sq_dev(&group_counts[b], &s.counts, &group_target)
                    - sq_dev(&group_counts[b], &zero, &group_target);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            })
            .unwrap();
        group_of[si] = best;
        for (g, c) in group_counts[best].iter_mut().zip(&s.counts) {
            *g += c;
        }
    }
    if group_of.iter().filter(|&&g| g == fold).count() == 0 {
        return config("test fold received no subjects");
    }

    // Greedy validation selection among non-test subjects.
    let val_target: Vec<f64> = totals.iter().map(|t| t * f_val).collect();
    let mut val_counts = vec![0.0; levels];
    let mut in_val = vec![false; subjects.len()];
    loop {
        let current = sq_dev(&val_counts, &vec![0.0; levels], &val_target);
        let best = (0..subjects.len())
            .filter(|&si| group_of[si] != fold && !in_val[si])
            .map(|si| (si, sq_dev(&val_counts, &subjects[si].counts, &val_target)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        match best {
            // the first pick is forced so validation is never empty
            Some((si, cost)) if cost < current || !in_val.iter().any(|&v| v) => {
                in_val[si] = true;
                for (v, c) in val_counts.iter_mut().zip(&subjects[si].counts) {
                    *v += c;
                }
            }
            _ => break,
        }
    }
    let remaining_train = (0..subjects.len()).any(|si| group_of[si] != fold && !in_val[si]);
    if !in_val.iter().any(|&v| v) || !remaining_train {
        return config("too few subjects to form non-empty train and validation sets");
    }

    let mut sets: [Vec<usize>; 3] = Default::default();
    for (si, s) in subjects.iter().enumerate() {
        let which = if group_of[si] == fold {
            2
        } else if in_val[si] {
            1
        } else {
            0
        };
        sets[which].extend(&s.members);
    }
    let ids = |v: &mut Vec<usize>| {
        v.sort_unstable();
        v.iter().map(|&i| manifest.entries[i].image_id()).collect::<Vec<_>>()
    };
    let [mut tr, mut va, mut te] = sets;
    Ok(SplitAssignment {
        fold_index: fold,
        train: ids(&mut tr),
        val: ids(&mut va),
        test: ids(&mut te),
    })
}
