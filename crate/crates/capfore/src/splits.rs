//! Train/dev/test fold construction for every holdout protocol: random
//! (L1), grouped (L2.1 / L2.2 / L3), family-by-task composition, shot and
//! model-scale extrapolation, and the small-bench family holdouts.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::record::RecordSet;
use crate::{seed, Error, Result};

/// The split protocols. L1 shuffles individual records; L2.1, L2.2, and L3
/// shuffle groups keyed by (family, n_param, task), (family, task, n_shot),
/// and (family, task) so a whole group lands on one side of the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvLevel {
    L1,
    L2_1,
    L2_2,
    L3,
}

/// Dev-set variants for the extrapolation settings. The held-out slice is
/// split 90/10 into `test` and `dev2`, the remainder 90/10 into `train`
/// and `dev1`. S1 is pure extrapolation (dev = dev1); S2 selects models on
/// dev2, leaking test-distribution information; S3 moves dev2 into
/// training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SVariant {
    S1,
    S2,
    S3,
}

/// What the extrapolation settings hold out: every record at one shot
/// count, or every record of one family's largest model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtrapolationHoldout {
    Shot(u32),
    LargestModel(String),
}

impl ExtrapolationHoldout {
    /// E1: hold out `n_shot = 3`.
    pub fn e1() -> Self {
        ExtrapolationHoldout::Shot(3)
    }

    /// E2.1: hold out the largest GPT-3 model.
    pub fn e2_1() -> Self {
        ExtrapolationHoldout::LargestModel("GPT-3".into())
    }

    /// E2.2: hold out the largest PaLM model.
    pub fn e2_2() -> Self {
        ExtrapolationHoldout::LargestModel("PaLM".into())
    }
}

/// Disjoint train/dev/test record-index sets. Indices refer to positions
/// in the owning `RecordSet` and are kept sorted for canonical
/// serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

impl Fold {
    fn new(mut train: Vec<usize>, mut dev: Vec<usize>, mut test: Vec<usize>) -> Fold {
        train.sort_unstable();
        dev.sort_unstable();
        test.sort_unstable();
        Fold { train, dev, test }
    }
}

type GroupKeyTuple = (String, u64, String, u32);

fn group_key(set: &RecordSet, idx: usize, level: CvLevel) -> GroupKeyTuple {
    let r = &set.records[idx];
    match level {
        CvLevel::L1 => (String::new(), idx as u64, String::new(), 0),
        CvLevel::L2_1 => (r.model_family.clone(), r.n_param_total, r.task.clone(), 0),
        CvLevel::L2_2 => (r.model_family.clone(), 0, r.task.clone(), r.n_shot),
        CvLevel::L3 => (r.model_family.clone(), 0, r.task.clone(), 0),
    }
}

/// k-fold cross validation. Groups are shuffled by seed and dealt
/// round-robin into k buckets (sizes differ by at most one group); fold i
/// takes bucket i as test and bucket i+1 (mod k) as dev, rotating which
/// buckets serve as dev and test. Every record lands in exactly one test
/// bucket across the k folds.
pub fn make_cv_folds(set: &RecordSet, level: CvLevel, k: usize, seed_val: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::TooFewGroups { got: k, want: 2 });
    }
    let mut grouped: std::collections::BTreeMap<GroupKeyTuple, Vec<usize>> =
        std::collections::BTreeMap::new();
    for idx in 0..set.records.len() {
        grouped.entry(group_key(set, idx, level)).or_default().push(idx);
    }
    let mut groups: Vec<Vec<usize>> = grouped.into_values().collect();
    if groups.len() < k {
        return Err(Error::TooFewGroups {
            got: groups.len(),
            want: k,
        });
    }
    let mut rng = seed::rng(seed_val);
    groups.shuffle(&mut rng);

    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, group) in groups.into_iter().enumerate() {
        buckets[i % k].extend(group);
    }

    let mut folds = Vec::with_capacity(k);
    for i in 0..k {
        let test = buckets[i].clone();
        let dev = buckets[(i + 1) % k].clone();
        let mut train = Vec::new();
        for (j, b) in buckets.iter().enumerate() {
            if j != i && j != (i + 1) % k {
                train.extend_from_slice(b);
            }
        }
        folds.push(Fold::new(train, dev, test));
    }
    Ok(folds)
}

/// The composition protocol: families are split into 3 disjoint groups and
/// tasks into 3 disjoint groups (both seeded), giving 3×3 = 9 test cells.
/// For the cell (Lᵢ, Tⱼ), test holds every record with family in Lᵢ and
/// task in Tⱼ; dev is the neighbouring family group on the same task group
/// (distributionally close to test without touching it); train is
/// everything else.
pub fn make_composition_folds(set: &RecordSet, seed_val: u64) -> Result<Vec<Fold>> {
    if set.families.len() < 3 || set.tasks.len() < 3 {
        return Err(Error::TooFewGroups {
            got: set.families.len().min(set.tasks.len()),
            want: 3,
        });
    }
    let mut rng = seed::rng(seed::derive(seed_val, "composition-families"));
    let mut families = set.families.clone();
    families.shuffle(&mut rng);
    let mut rng = seed::rng(seed::derive(seed_val, "composition-tasks"));
    let mut tasks = set.tasks.clone();
    tasks.shuffle(&mut rng);

    let deal3 = |items: Vec<String>| -> Vec<BTreeSet<String>> {
        let mut groups = vec![BTreeSet::new(), BTreeSet::new(), BTreeSet::new()];
        for (i, item) in items.into_iter().enumerate() {
            groups[i % 3].insert(item);
        }
        groups
    };
    let family_groups = deal3(families);
    let task_groups = deal3(tasks);

    let mut folds = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            let test_fams = &family_groups[i];
            let dev_fams = &family_groups[(i + 1) % 3];
            let cell_tasks = &task_groups[j];
            let mut train = Vec::new();
            let mut dev = Vec::new();
            let mut test = Vec::new();
            for (idx, r) in set.records.iter().enumerate() {
                if cell_tasks.contains(&r.task) && test_fams.contains(&r.model_family) {
                    test.push(idx);
                } else if cell_tasks.contains(&r.task) && dev_fams.contains(&r.model_family) {
                    dev.push(idx);
                } else {
                    train.push(idx);
                }
            }
            folds.push(Fold::new(train, dev, test));
        }
    }
    Ok(folds)
}

/// Shuffle `indices` by seed and split off roughly 10% (at least one
/// element) as the second part.
fn split_90_10(mut indices: Vec<usize>, seed_val: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::rng(seed_val);
    indices.shuffle(&mut rng);
    let n_ten = ((indices.len() as f64) * 0.1).round().max(1.0) as usize;
    let ten = indices.split_off(indices.len() - n_ten.min(indices.len()));
    (indices, ten)
}

/// Build one extrapolation fold. The held-out slice becomes the test
/// distribution; the S variant decides which 10% slices serve as dev (and,
/// for S3, leak into training).
pub fn make_extrapolation_fold(
    set: &RecordSet,
    holdout: &ExtrapolationHoldout,
    variant: SVariant,
    seed_val: u64,
) -> Result<Fold> {
    let held: Vec<usize> = match holdout {
        ExtrapolationHoldout::Shot(s) => (0..set.records.len())
            .filter(|&i| set.records[i].n_shot == *s)
            .collect(),
        ExtrapolationHoldout::LargestModel(family) => {
            let largest = set
                .records
                .iter()
                .filter(|r| &r.model_family == family)
                .map(|r| r.n_param_total)
                .max()
                .ok_or_else(|| Error::EmptyHoldout(format!("no records for family {family}")))?;
            (0..set.records.len())
                .filter(|&i| {
                    set.records[i].model_family == *family
                        && set.records[i].n_param_total == largest
                })
                .collect()
        }
    };
    if held.is_empty() {
        return Err(Error::EmptyHoldout(format!("{holdout:?}")));
    }
    let rest: Vec<usize> = {
        let held_set: BTreeSet<usize> = held.iter().copied().collect();
        (0..set.records.len()).filter(|i| !held_set.contains(i)).collect()
    };
    if rest.is_empty() {
        return Err(Error::EmptyHoldout("holdout covers the whole dataset".into()));
    }

    let (train90, dev1) = split_90_10(rest, seed::derive(seed_val, "extrapolation-train"));
    let (test90, dev2) = split_90_10(held, seed::derive(seed_val, "extrapolation-test"));
    if test90.is_empty() || train90.is_empty() {
        return Err(Error::EmptyHoldout("held-out slice too small to split".into()));
    }

    let fold = match variant {
        SVariant::S1 => Fold::new(train90, dev1, test90),
        SVariant::S2 => Fold::new(train90, dev2, test90),
        SVariant::S3 => {
            let mut train = train90;
            train.extend(dev2);
            Fold::new(train, dev1, test90)
        }
    };
    Ok(fold)
}

/// The small-bench holdout: with T_test the tasks outside `t_train`, test
/// holds the L_test × T_test records, dev the L_dev × T_test records, and
/// train everything else (all other families in full, plus the T_train
/// rows of L_dev and L_test).
pub fn make_smallbench_fold(
    set: &RecordSet,
    t_train: &BTreeSet<String>,
    l_dev: &str,
    l_test: &str,
) -> Result<Fold> {
    if l_dev == l_test {
        return Err(Error::InvalidConfig(format!(
            "small-bench dev and test family are both {l_test}"
        )));
    }
    let mut train = Vec::new();
    let mut dev = Vec::new();
    let mut test = Vec::new();
    for (idx, r) in set.records.iter().enumerate() {
        let held_task = !t_train.contains(&r.task);
        if held_task && r.model_family == l_test {
            test.push(idx);
        } else if held_task && r.model_family == l_dev {
            dev.push(idx);
        } else {
            train.push(idx);
        }
    }
    if test.is_empty() {
        return Err(Error::EmptyTestCell(format!(
            "family {l_test} has no records outside the training tasks"
        )));
    }
    Ok(Fold::new(train, dev, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{ExperimentRecord, Metric, RecordSet};
    use std::collections::HashSet;

    fn rec(family: &str, n_param: u64, task: &str, shot: u32) -> ExperimentRecord {
        ExperimentRecord {
            model_family: family.into(),
            n_param_total: n_param,
            n_param_nonembed: None,
            n_param_flopmatched: None,
            task: task.into(),
            n_shot: shot,
            metric: Metric::MultipleChoiceGrade,
            score_raw: 0.5,
            score_norm: 0.5,
            is_programmatic: false,
            is_aggregate: false,
        }
    }

    fn grid(families: &[&str], models: u64, tasks: usize, shots: &[u32]) -> RecordSet {
        let mut rows = Vec::new();
        for (fi, f) in families.iter().enumerate() {
            for m in 0..models {
                for t in 0..tasks {
                    for &s in shots {
                        rows.push(rec(f, (fi as u64 + 1) * 100 + m, &format!("t{t:02}"), s));
                    }
                }
            }
        }
        RecordSet::from_records(rows).unwrap()
    }

    fn assert_fold_invariants(set: &RecordSet, fold: &Fold) {
        let train: HashSet<_> = fold.train.iter().collect();
        let dev: HashSet<_> = fold.dev.iter().collect();
        let test: HashSet<_> = fold.test.iter().collect();
        assert!(train.is_disjoint(&dev));
        assert!(train.is_disjoint(&test));
        assert!(dev.is_disjoint(&test));
        assert!(!test.is_empty());
        assert!(fold.train.iter().all(|&i| i < set.records.len()));
    }

    #[test]
    fn l1_folds_partition_one_hundred_records() {
        let set = grid(&["A"], 1, 25, &[0, 1, 2, 5]);
        assert_eq!(set.len(), 100);
        let folds = make_cv_folds(&set, CvLevel::L1, 10, 7).unwrap();
        assert_eq!(folds.len(), 10);
        let mut seen = HashSet::new();
        for fold in &folds {
            assert_fold_invariants(&set, fold);
            assert_eq!(fold.test.len(), 10);
            for &i in &fold.test {
                assert!(seen.insert(i), "record {i} in two test sets");
            }
        }
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn l3_groups_stay_atomic() {
        let set = grid(&["F"], 1, 12, &[0, 1, 2, 3]);
        let folds = make_cv_folds(&set, CvLevel::L3, 10, 3).unwrap();
        for fold in &folds {
            assert_fold_invariants(&set, fold);
            // All 4 shot rows of each (family, task) share one side.
            for task in &set.tasks {
                let rows: Vec<usize> = (0..set.len())
                    .filter(|&i| &set.records[i].task == task)
                    .collect();
                let in_test = rows.iter().filter(|i| fold.test.contains(i)).count();
                let in_dev = rows.iter().filter(|i| fold.dev.contains(i)).count();
                assert!(in_test == 0 || in_test == rows.len());
                assert!(in_dev == 0 || in_dev == rows.len());
            }
        }
    }

    #[test]
    fn folds_are_seed_deterministic() {
        let set = grid(&["A", "B"], 2, 10, &[0, 1]);
        for level in [CvLevel::L1, CvLevel::L2_1, CvLevel::L2_2, CvLevel::L3] {
            let a = make_cv_folds(&set, level, 5, 99).unwrap();
            let b = make_cv_folds(&set, level, 5, 99).unwrap();
            assert_eq!(
                serde_json::to_vec(&a).unwrap(),
                serde_json::to_vec(&b).unwrap()
            );
            let c = make_cv_folds(&set, level, 5, 100).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn too_few_groups_is_an_error() {
        let set = grid(&["A"], 1, 3, &[0]);
        assert!(matches!(
            make_cv_folds(&set, CvLevel::L1, 10, 0),
            Err(Error::TooFewGroups { got: 3, want: 10 })
        ));
    }

    #[test]
    fn composition_gives_nine_disjoint_test_cells() {
        let set = grid(&["A", "B", "C", "D", "E", "F"], 1, 9, &[0]);
        let folds = make_composition_folds(&set, 5).unwrap();
        assert_eq!(folds.len(), 9);
        let mut seen = HashSet::new();
        for fold in &folds {
            assert_fold_invariants(&set, fold);
            for &i in &fold.test {
                assert!(seen.insert(i));
            }
        }
        assert_eq!(seen.len(), set.len());
    }

    #[test]
    fn composition_test_cell_shares_no_family_task_with_train() {
        let set = grid(&["A", "B", "C"], 1, 3, &[0, 1]);
        let folds = make_composition_folds(&set, 11).unwrap();
        // 3 families × 3 tasks × 2 shots = 18 records; each cell holds the
        // 2 shot rows of exactly one (family, task) pair.
        for fold in &folds {
            assert_eq!(fold.test.len(), 2);
            let test_cells: HashSet<(String, String)> = fold
                .test
                .iter()
                .map(|&i| {
                    (
                        set.records[i].model_family.clone(),
                        set.records[i].task.clone(),
                    )
                })
                .collect();
            for &i in &fold.train {
                let cell = (
                    set.records[i].model_family.clone(),
                    set.records[i].task.clone(),
                );
                assert!(!test_cells.contains(&cell));
            }
        }
    }

    #[test]
    fn composition_needs_three_families_and_tasks() {
        let set = grid(&["A", "B"], 1, 5, &[0]);
        assert!(make_composition_folds(&set, 0).is_err());
    }

    #[test]
    fn extrapolation_variants_split_ninety_ten() {
        // 40 held-in rows (shots 0..2), 20 held-out rows at shot 3.
        let set = grid(&["A"], 1, 20, &[0, 1, 3]);
        let held: Vec<usize> = (0..set.len()).filter(|&i| set.records[i].n_shot == 3).collect();
        assert_eq!(held.len(), 20);
        for variant in [SVariant::S1, SVariant::S2, SVariant::S3] {
            let fold =
                make_extrapolation_fold(&set, &ExtrapolationHoldout::e1(), variant, 42).unwrap();
            assert_fold_invariants(&set, &fold);
            assert_eq!(fold.test.len(), 18);
            match variant {
                SVariant::S1 => {
                    assert_eq!(fold.dev.len(), 4); // 10% of 40
                    assert_eq!(fold.train.len(), 36);
                }
                SVariant::S2 => {
                    assert_eq!(fold.dev.len(), 2); // 10% of 20
                    assert_eq!(fold.train.len(), 36);
                    // dev comes from the held-out slice
                    assert!(fold.dev.iter().all(|&i| set.records[i].n_shot == 3));
                }
                SVariant::S3 => {
                    assert_eq!(fold.dev.len(), 4);
                    assert_eq!(fold.train.len(), 38); // 36 + leaked 2
                }
            }
            // Test rows always come from the held-out slice.
            assert!(fold.test.iter().all(|&i| set.records[i].n_shot == 3));
        }
    }

    #[test]
    fn extrapolation_largest_model_holdout() {
        let set = grid(&["GPT-3", "PaLM"], 3, 4, &[0]);
        let fold = make_extrapolation_fold(
            &set,
            &ExtrapolationHoldout::e2_1(),
            SVariant::S1,
            1,
        )
        .unwrap();
        let largest = set
            .records
            .iter()
            .filter(|r| r.model_family == "GPT-3")
            .map(|r| r.n_param_total)
            .max()
            .unwrap();
        assert!(fold
            .test
            .iter()
            .all(|&i| set.records[i].model_family == "GPT-3"
                && set.records[i].n_param_total == largest));
    }

    #[test]
    fn extrapolation_empty_holdout_is_an_error() {
        let set = grid(&["A"], 1, 4, &[0, 1]);
        assert!(matches!(
            make_extrapolation_fold(&set, &ExtrapolationHoldout::Shot(3), SVariant::S1, 0),
            Err(Error::EmptyHoldout(_))
        ));
        assert!(matches!(
            make_extrapolation_fold(&set, &ExtrapolationHoldout::e2_2(), SVariant::S1, 0),
            Err(Error::EmptyHoldout(_))
        ));
    }

    #[test]
    fn smallbench_fold_partitions_by_set_algebra() {
        let set = grid(&["a", "b", "c"], 1, 10, &[0]);
        let t_train: BTreeSet<String> = (0..4).map(|t| format!("t{t:02}")).collect();
        let fold = make_smallbench_fold(&set, &t_train, "b", "c").unwrap();
        assert_fold_invariants(&set, &fold);
        assert_eq!(fold.train.len() + fold.dev.len() + fold.test.len(), set.len());
        // Family a appears entirely in train.
        for &i in fold.dev.iter().chain(&fold.test) {
            assert_ne!(set.records[i].model_family, "a");
        }
        // T_train rows of b and c are in train.
        for &i in &fold.train {
            let r = &set.records[i];
            if r.model_family != "a" {
                assert!(t_train.contains(&r.task));
            }
        }
        // Exhaustive cell check: dev = b × T_test, test = c × T_test.
        for (idx, r) in set.records.iter().enumerate() {
            let held = !t_train.contains(&r.task);
            let expected = match (r.model_family.as_str(), held) {
                ("c", true) => &fold.test,
                ("b", true) => &fold.dev,
                _ => &fold.train,
            };
            assert!(expected.contains(&idx));
        }
    }

    #[test]
    fn smallbench_same_family_is_invalid() {
        let set = grid(&["a", "b"], 1, 4, &[0]);
        let t_train = BTreeSet::new();
        assert!(make_smallbench_fold(&set, &t_train, "a", "a").is_err());
    }

    #[test]
    fn smallbench_empty_test_cell_is_an_error() {
        let set = grid(&["a", "b"], 1, 4, &[0]);
        let t_train: BTreeSet<String> = set.tasks.iter().cloned().collect();
        assert!(matches!(
            make_smallbench_fold(&set, &t_train, "a", "b"),
            Err(Error::EmptyTestCell(_))
        ));
    }
}
