//! Action-unit catalogue and expression-category subsets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FeatureFrame;
use crate::error::{QfeError, Result};

/// FACS action units evaluated by the scorer, with their short descriptions.
pub const AU_DESCRIPTIONS: [(u8, &str); 18] = [
    (1, "Inner brow raiser"),
    (2, "Outer brow raiser"),
    (4, "Brow lowerer"),
    (5, "Upper lid raiser"),
    (6, "Cheek raiser"),
    (7, "Lid tightener"),
    (9, "Nose wrinkler"),
    (10, "Upper lip raiser"),
    (12, "Lip corner puller"),
    (14, "Dimpler"),
    (15, "Lip corner depressor"),
    (17, "Chin raiser"),
    (20, "Lip stretcher"),
    (23, "Lip tightener"),
    (25, "Lips part"),
    (26, "Jaw drop"),
    (28, "Lip suck"),
    (45, "Blink"),
];

pub fn au_description(au: u8) -> Option<&'static str> {
    AU_DESCRIPTIONS
        .iter()
        .find(|(id, _)| *id == au)
        .map(|(_, d)| *d)
}

/// Expression category name → the action units that make it up.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AUCategoryMap(BTreeMap<String, Vec<u8>>);

impl AUCategoryMap {
    /// The standard map: the `overall` face set, the pain set used for
    /// context analysis, and one entry per discrete emotion category.
    pub fn standard() -> Self {
        let entries: [(&str, &[u8]); 13] = [
            ("overall", &[1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 28, 45]),
            ("pain", &[4, 6, 9, 10, 25]),
            ("amusement", &[6, 7, 12, 25, 26]),
            ("anger", &[4, 5, 17, 23]),
            ("confusion", &[4, 7]),
            ("disgust", &[7, 9, 25, 26]),
            ("embarrassment", &[7, 12, 15]),
            ("fear", &[1, 2, 4, 5, 7, 20, 25]),
            ("happiness", &[6, 7, 12, 25, 26]),
            ("interest", &[1, 2, 12]),
            ("sadness", &[1, 4, 6, 15, 17]),
            ("surprise", &[1, 2, 5, 25, 26]),
            ("sympathy", &[1, 17]),
        ];
        AUCategoryMap(
            entries
                .iter()
                .map(|(name, aus)| (name.to_string(), aus.to_vec()))
                .collect(),
        )
    }

    /// Adds or replaces a category. AU ids are stored sorted and deduplicated;
    /// ids outside the catalogue are rejected.
    pub fn insert(&mut self, category: impl Into<String>, aus: &[u8]) -> Result<()> {
        if aus.is_empty() {
            return Err(QfeError::domain("an AU category needs at least one AU"));
        }
        if let Some(bad) = aus.iter().find(|au| au_description(**au).is_none()) {
            return Err(QfeError::domain(format!("AU{bad:02} is not in the AU catalogue")));
        }
        let mut aus = aus.to_vec();
        aus.sort_unstable();
        aus.dedup();
        self.0.insert(category.into(), aus);
        Ok(())
    }

    pub fn get(&self, category: &str) -> Result<&[u8]> {
        self.0
            .get(category)
            .map(Vec::as_slice)
            .ok_or_else(|| QfeError::UnknownCategory(category.to_string()))
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

impl Default for AUCategoryMap {
    fn default() -> Self {
        Self::standard()
    }
}

/// Intensities of the category's AUs for one frame, in ascending AU order.
pub fn select_au_subset(
    frame: &FeatureFrame,
    category: &str,
    map: &AUCategoryMap,
) -> Result<Vec<f64>> {
    map.get(category)?
        .iter()
        .map(|au| {
            frame
                .au_intensities
                .get(au)
                .copied()
                .ok_or_else(|| QfeError::MissingFeature(format!("AU{au:02}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_with_all_aus() -> FeatureFrame {
        let mut frame = FeatureFrame::empty(0, 0.0);
        for (au, _) in AU_DESCRIPTIONS {
            frame.au_intensities.insert(au, f64::from(au) / 10.0);
        }
        frame
    }

    #[test]
    fn pain_subset_is_ascending() {
        let frame = frame_with_all_aus();
        let v = select_au_subset(&frame, "pain", &AUCategoryMap::standard()).unwrap();
        assert_eq!(v, vec![0.4, 0.6, 0.9, 1.0, 2.5]);
    }

    #[test]
    fn happiness_subset() {
        let map = AUCategoryMap::standard();
        assert_eq!(map.get("happiness").unwrap(), &[6, 7, 12, 25, 26]);
    }

    #[test]
    fn overall_has_eighteen_aus() {
        let map = AUCategoryMap::standard();
        let overall = map.get("overall").unwrap();
        assert_eq!(overall.len(), 18);
        assert_eq!(
            overall,
            &[1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 28, 45]
        );
    }

    #[test]
    fn unknown_category() {
        let frame = frame_with_all_aus();
        let err = select_au_subset(&frame, "joyfulness", &AUCategoryMap::standard()).unwrap_err();
        assert!(matches!(err, QfeError::UnknownCategory(c) if c == "joyfulness"));
    }

    #[test]
    fn missing_au_is_named() {
        let mut frame = frame_with_all_aus();
        frame.au_intensities.remove(&10);
        let err = select_au_subset(&frame, "pain", &AUCategoryMap::standard()).unwrap_err();
        assert!(matches!(err, QfeError::MissingFeature(au) if au == "AU10"));
    }

    #[test]
    fn every_mapped_au_is_catalogued() {
        let map = AUCategoryMap::standard();
        let required = [
            "overall", "pain", "amusement", "anger", "confusion", "disgust",
            "embarrassment", "fear", "happiness", "interest", "sadness", "surprise", "sympathy",
        ];
        for cat in required {
            for au in map.get(cat).unwrap() {
                assert!(au_description(*au).is_some(), "{cat}: AU{au}");
            }
        }
    }

    #[test]
    fn insert_rejects_uncatalogued_au() {
        let mut map = AUCategoryMap::standard();
        assert!(map.insert("custom", &[53]).is_err());
        map.insert("custom", &[12, 6, 12]).unwrap();
        assert_eq!(map.get("custom").unwrap(), &[6, 12]);
    }
}
