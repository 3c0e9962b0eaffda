use std::collections::BTreeMap;

use super::StudyDataset;
use crate::normalize::NormalizationRules;

/// Word counts over all association entries, most frequent first.
///
/// Entries are lowercased and singularized; multi-word phrases are counted as
/// typed. Ties are ordered alphabetically.
pub fn word_frequency(dataset: &StudyDataset, rules: &NormalizationRules) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for word in dataset.associations().iter().flat_map(|a| a.words()) {
        if let Some(key) = rules.frequency_key(word) {
            *counts.entry(key).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}
