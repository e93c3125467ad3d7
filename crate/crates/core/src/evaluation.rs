//! Dataset splitting, confusion matrix, and accuracy/per-class reporting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{MaterialClass, NUM_CLASSES};
use crate::error::{Error, Result};

/// How records are partitioned into train and test sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Split applied within each class so every class keeps its proportion.
    #[default]
    Stratified,
    /// One seeded shuffle of all records, first `round(N * fraction)` to test.
    Plain,
}

/// Index partition of a record sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Partitions record indices into train and test by seeded shuffle.
///
/// In stratified mode the shuffle and the `round(N_c * fraction)` cut are
/// applied per class, remainders going to train; a class with a single record
/// is kept in train with a warning. Deterministic given the seed.
pub fn train_test_split(
    labels: &[MaterialClass],
    test_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if labels.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 records to split, got {}",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split { train: Vec::new(), test: Vec::new(), warnings: Vec::new() };

    match mode {
        SplitMode::Plain => {
            let mut indices: Vec<usize> = (0..labels.len()).collect();
            indices.shuffle(&mut rng);
            let n_test = (labels.len() as f64 * test_fraction).round() as usize;
            split.test = indices[..n_test].to_vec();
            split.train = indices[n_test..].to_vec();
        }
        SplitMode::Stratified => {
            for class in MaterialClass::ALL {
                let mut indices: Vec<usize> = labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c == class)
                    .map(|(i, _)| i)
                    .collect();
                if indices.is_empty() {
                    continue;
                }
                if indices.len() == 1 {
                    split.warnings.push(format!(
                        "class {class} has a single record; assigned to train"
                    ));
                    split.train.push(indices[0]);
                    continue;
                }
                indices.shuffle(&mut rng);
                let n_test = (indices.len() as f64 * test_fraction).round() as usize;
                split.test.extend_from_slice(&indices[..n_test]);
                split.train.extend_from_slice(&indices[n_test..]);
            }
        }
    }
    if split.train.is_empty() || split.test.is_empty() {
        split.warnings.push("split left one side empty".to_string());
    }
    Ok(split)
}

/// Splits whole groups (e.g. one physical container's windows) so no group
/// appears in both sets. Per class, groups are shuffled and assigned to test
/// until the class's `round(N_c * fraction)` record quota is reached.
pub fn train_test_split_grouped(
    labels: &[MaterialClass],
    groups: &[u32],
    test_fraction: f64,
    seed: u64,
) -> Result<Split> {
    if labels.len() != groups.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels vs {} group ids",
            labels.len(),
            groups.len()
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if labels.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 records to split, got {}",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split { train: Vec::new(), test: Vec::new(), warnings: Vec::new() };

    for class in MaterialClass::ALL {
        let class_indices: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == class)
            .map(|(i, _)| i)
            .collect();
        if class_indices.is_empty() {
            continue;
        }
        let mut group_ids: Vec<u32> = class_indices.iter().map(|&i| groups[i]).collect();
        group_ids.sort_unstable();
        group_ids.dedup();
        group_ids.shuffle(&mut rng);

        if group_ids.len() == 1 {
            split.warnings.push(format!(
                "class {class} has a single group; assigned to train"
            ));
            split.train.extend_from_slice(&class_indices);
            continue;
        }
        let quota = (class_indices.len() as f64 * test_fraction).round() as usize;
        let mut test_groups = Vec::new();
        let mut assigned = 0usize;
        for g in &group_ids {
            if assigned >= quota {
                break;
            }
            test_groups.push(*g);
            assigned += class_indices.iter().filter(|&&i| groups[i] == *g).count();
        }
        for &i in &class_indices {
            if test_groups.contains(&groups[i]) {
                split.test.push(i);
            } else {
                split.train.push(i);
            }
        }
    }
    Ok(split)
}

/// 5x5 count grid of actual (rows) versus predicted (columns) class,
/// both in class-code order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[[u64; NUM_CLASSES]; NUM_CLASSES] {
        &self.counts
    }

    pub fn cell(&self, actual: MaterialClass, predicted: MaterialClass) -> u64 {
        self.counts[actual.code() as usize][predicted.code() as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn misclassified(&self) -> u64 {
        self.total() - self.correct()
    }

    /// Fraction of records on the diagonal; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }

    /// Number of actual records of `class` (row sum).
    pub fn support(&self, class: MaterialClass) -> u64 {
        self.counts[class.code() as usize].iter().sum()
    }

    /// Number of predictions of `class` (column sum).
    pub fn predicted_count(&self, class: MaterialClass) -> u64 {
        (0..NUM_CLASSES)
            .map(|i| self.counts[i][class.code() as usize])
            .sum()
    }
}

/// Tallies actual/predicted pairs into a confusion matrix.
pub fn confusion_matrix(
    actuals: &[MaterialClass],
    predictions: &[MaterialClass],
) -> Result<ConfusionMatrix> {
    if actuals.len() != predictions.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} actuals vs {} predictions",
            actuals.len(),
            predictions.len()
        )));
    }
    if actuals.is_empty() {
        return Err(Error::EmptyDataset("no records to evaluate".into()));
    }
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (&a, &p) in actuals.iter().zip(predictions) {
        counts[a.code() as usize][p.code() as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Per-class precision/recall with supports. When a denominator is zero the
/// metric is reported as 0 and flagged undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
    pub predicted: u64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

/// Machine-readable evaluation summary. Field order is the stable key order
/// of the serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub matrix: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

/// Builds the evaluation report for a non-empty confusion matrix.
pub fn report(cm: &ConfusionMatrix) -> Result<EvalReport> {
    if cm.total() == 0 {
        return Err(Error::EmptyDataset("confusion matrix has no records".into()));
    }
    let per_class = MaterialClass::ALL
        .iter()
        .map(|&class| {
            let tp = cm.cell(class, class);
            let support = cm.support(class);
            let predicted = cm.predicted_count(class);
            ClassMetrics {
                class: class.name().to_string(),
                precision: if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 },
                recall: if support == 0 { 0.0 } else { tp as f64 / support as f64 },
                support,
                predicted,
                precision_undefined: predicted == 0,
                recall_undefined: support == 0,
            }
        })
        .collect();
    Ok(EvalReport {
        accuracy: cm.accuracy(),
        per_class,
        matrix: *cm.counts(),
    })
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let total: u64 = self.matrix.iter().flatten().sum();
        let correct: u64 = (0..NUM_CLASSES).map(|i| self.matrix[i][i]).sum();
        writeln!(f, "accuracy: {:.4} ({correct}/{total})", self.accuracy)?;
        writeln!(f)?;
        write!(f, "{:>18}", "predicted ->")?;
        for class in MaterialClass::ALL {
            write!(f, "{:>9}", class.name())?;
        }
        writeln!(f, "{:>9}{:>9}", "recall", "support")?;
        for (row, class) in MaterialClass::ALL.iter().enumerate() {
            write!(f, "{:>18}", format!("actual {}", class.name()))?;
            for col in 0..NUM_CLASSES {
                write!(f, "{:>9}", self.matrix[row][col])?;
            }
            let m = &self.per_class[row];
            let recall = if m.recall_undefined {
                "-".to_string()
            } else {
                format!("{:.3}", m.recall)
            };
            writeln!(f, "{recall:>9}{:>9}", m.support)?;
        }
        write!(f, "{:>18}", "precision")?;
        for m in &self.per_class {
            let p = if m.precision_undefined {
                "-".to_string()
            } else {
                format!("{:.3}", m.precision)
            };
            write!(f, "{p:>9}")?;
        }
        writeln!(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn balanced_labels(per_class: usize) -> Vec<MaterialClass> {
        let mut labels = Vec::new();
        for class in MaterialClass::ALL {
            labels.extend(std::iter::repeat_n(class, per_class));
        }
        labels
    }

    #[test]
    fn split_100_records_at_30_percent() {
        let labels = balanced_labels(20);
        for mode in [SplitMode::Stratified, SplitMode::Plain] {
            let split = train_test_split(&labels, 0.30, 7, mode).unwrap();
            assert_eq!(split.test.len(), 30);
            assert_eq!(split.train.len(), 70);
        }
    }

    #[test]
    fn split_two_records_at_half() {
        let labels = vec![MaterialClass::Glass, MaterialClass::Glass];
        let split = train_test_split(&labels, 0.5, 1, SplitMode::Stratified).unwrap();
        assert_eq!(split.train.len(), 1);
        assert_eq!(split.test.len(), 1);
    }

    #[test]
    fn split_is_a_partition() {
        let labels = balanced_labels(13);
        let split = train_test_split(&labels, 0.3, 3, SplitMode::Stratified).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }

    #[test]
    fn singleton_class_goes_to_train_with_warning() {
        let mut labels = balanced_labels(4);
        labels.push(MaterialClass::Empty); // 5th class appears... make a true singleton
        let labels: Vec<MaterialClass> = labels
            .into_iter()
            .filter(|c| *c != MaterialClass::Empty)
            .chain(std::iter::once(MaterialClass::Empty))
            .collect();
        let split = train_test_split(&labels, 0.3, 9, SplitMode::Stratified).unwrap();
        let empty_idx = labels.len() - 1;
        assert!(split.train.contains(&empty_idx));
        assert!(!split.test.contains(&empty_idx));
        assert!(split.warnings.iter().any(|w| w.contains("empty")));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let labels = balanced_labels(2);
        assert!(train_test_split(&labels, 0.0, 1, SplitMode::Plain).is_err());
        assert!(train_test_split(&labels, 1.0, 1, SplitMode::Plain).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let labels = balanced_labels(10);
        let a = train_test_split(&labels, 0.3, 42, SplitMode::Stratified).unwrap();
        let b = train_test_split(&labels, 0.3, 42, SplitMode::Stratified).unwrap();
        assert_eq!(a, b);
        let c = train_test_split(&labels, 0.3, 43, SplitMode::Stratified).unwrap();
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn grouped_split_keeps_groups_whole() {
        // 4 groups of 5 windows per class.
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for class in MaterialClass::ALL {
            for g in 0..4u32 {
                for _ in 0..5 {
                    labels.push(class);
                    groups.push(g);
                }
            }
        }
        let split = train_test_split_grouped(&labels, &groups, 0.25, 11).unwrap();
        for class in MaterialClass::ALL {
            let train_groups: std::collections::HashSet<u32> = split
                .train
                .iter()
                .filter(|&&i| labels[i] == class)
                .map(|&i| groups[i])
                .collect();
            let test_groups: std::collections::HashSet<u32> = split
                .test
                .iter()
                .filter(|&&i| labels[i] == class)
                .map(|&i| groups[i])
                .collect();
            assert!(train_groups.is_disjoint(&test_groups));
        }
        let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }

    #[test]
    fn all_correct_is_diagonal_with_accuracy_one() {
        let labels = balanced_labels(8);
        let cm = confusion_matrix(&labels, &labels).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
        assert_eq!(cm.misclassified(), 0);
        let rep = report(&cm).unwrap();
        for m in &rep.per_class {
            assert_eq!(m.precision, 1.0);
            assert_eq!(m.recall, 1.0);
        }
    }

    #[test]
    fn four_plastic_glass_errors_in_200_gives_98_percent() {
        let mut actuals = balanced_labels(40);
        let mut preds = actuals.clone();
        // Two plastic records predicted glass, two glass records predicted plastic.
        let mut flipped_p = 0;
        let mut flipped_g = 0;
        for (i, &a) in actuals.iter().enumerate() {
            if a == MaterialClass::Plastic && flipped_p < 2 {
                preds[i] = MaterialClass::Glass;
                flipped_p += 1;
            }
            if a == MaterialClass::Glass && flipped_g < 2 {
                preds[i] = MaterialClass::Plastic;
                flipped_g += 1;
            }
        }
        actuals.truncate(200);
        preds.truncate(200);
        let cm = confusion_matrix(&actuals, &preds).unwrap();
        assert_eq!(cm.total(), 200);
        assert_eq!(cm.accuracy(), 0.98);
        assert_eq!(cm.cell(MaterialClass::Plastic, MaterialClass::Glass), 2);
        assert_eq!(cm.cell(MaterialClass::Glass, MaterialClass::Plastic), 2);
    }

    #[test]
    fn matrix_matches_pair_tally_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let draw = |rng: &mut ChaCha8Rng| {
            MaterialClass::from_code(rng.random_range(0..5u8)).unwrap()
        };
        let actuals: Vec<MaterialClass> = (0..500).map(|_| draw(&mut rng)).collect();
        let preds: Vec<MaterialClass> = (0..500).map(|_| draw(&mut rng)).collect();
        let cm = confusion_matrix(&actuals, &preds).unwrap();
        for a in MaterialClass::ALL {
            for p in MaterialClass::ALL {
                let expected = actuals
                    .iter()
                    .zip(&preds)
                    .filter(|(&x, &y)| x == a && y == p)
                    .count() as u64;
                assert_eq!(cm.cell(a, p), expected);
            }
        }
    }

    #[test]
    fn confusion_matrix_rejects_mismatched_lengths() {
        let a = vec![MaterialClass::Metal];
        let p = vec![MaterialClass::Metal, MaterialClass::Glass];
        assert!(confusion_matrix(&a, &p).is_err());
        assert!(confusion_matrix(&[], &[]).is_err());
    }

    #[test]
    fn never_predicted_class_is_flagged() {
        // Everything predicted metal.
        let actuals = vec![
            MaterialClass::Metal,
            MaterialClass::Plastic,
            MaterialClass::Glass,
        ];
        let preds = vec![MaterialClass::Metal; 3];
        let cm = confusion_matrix(&actuals, &preds).unwrap();
        let rep = report(&cm).unwrap();
        let glass = &rep.per_class[MaterialClass::Glass.code() as usize];
        assert_eq!(glass.precision, 0.0);
        assert!(glass.precision_undefined);
        assert!(!glass.recall_undefined);
        let empty = &rep.per_class[MaterialClass::Empty.code() as usize];
        assert!(empty.recall_undefined);
    }

    #[test]
    fn report_serialization_is_stable() {
        let labels = balanced_labels(3);
        let cm = confusion_matrix(&labels, &labels).unwrap();
        let a = serde_json::to_string(&report(&cm).unwrap()).unwrap();
        let b = serde_json::to_string(&report(&cm).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.find("\"accuracy\"").unwrap() < a.find("\"per_class\"").unwrap());
        assert!(a.find("\"per_class\"").unwrap() < a.find("\"matrix\"").unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn prop_split_partition_and_stratification(
            counts in proptest::array::uniform5(0usize..40),
            fraction in 0.05f64..0.95,
            seed in 0u64..10_000,
        ) {
            let mut labels = Vec::new();
            for (k, &n) in counts.iter().enumerate() {
                let class = MaterialClass::from_code(k as u8).unwrap();
                labels.extend(std::iter::repeat_n(class, n));
            }
            prop_assume!(labels.len() >= 2);

            let split = train_test_split(&labels, fraction, seed, SplitMode::Stratified).unwrap();

            // Partition: union is the whole index set, no repeats.
            let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());

            // Stratification: per-class test counts match the rounding rule.
            for (k, &n) in counts.iter().enumerate() {
                let class = MaterialClass::from_code(k as u8).unwrap();
                let class_test = split.test.iter().filter(|&&i| labels[i] == class).count();
                let expected = if n <= 1 { 0 } else { (n as f64 * fraction).round() as usize };
                prop_assert_eq!(class_test, expected);
            }
        }

        #[test]
        fn prop_accuracy_in_unit_interval(seed in 0u64..10_000, n in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let actuals: Vec<MaterialClass> = (0..n)
                .map(|_| MaterialClass::from_code(rng.random_range(0..5u8)).unwrap())
                .collect();
            let preds: Vec<MaterialClass> = (0..n)
                .map(|_| MaterialClass::from_code(rng.random_range(0..5u8)).unwrap())
                .collect();
            let cm = confusion_matrix(&actuals, &preds).unwrap();
            prop_assert_eq!(cm.total(), n as u64);
            prop_assert!((0.0..=1.0).contains(&cm.accuracy()));
        }
    }
}
