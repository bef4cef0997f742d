//! 6x6 datasets: canonical digit glyphs with noisy variants, random
//! images, the checkerboard probe, and the class-surgery operations used
//! by the not-a-digit and imbalance experiments.
//!
//! Every generator is a pure function of its arguments, seed included, and
//! surgery always returns a new dataset.

mod glyphs;
mod io;

pub use glyphs::GlyphSet;
pub use io::{dataset_load, dataset_save, DATASET_FORMAT_VERSION};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PixelGrid, GRID_COLS, GRID_LEN, GRID_ROWS};
use crate::rng::SeededRng;

pub const NOT_A_DIGIT: &str = "not-a-digit";
pub const DEFAULT_RANDOM_DENSITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: PixelGrid,
    pub class_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    classes: Vec<String>,
    examples: Vec<LabeledImage>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        classes: Vec<String>,
        examples: Vec<LabeledImage>,
    ) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Argument("dataset needs at least one class".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::Argument(format!("duplicate class name {c:?}")));
            }
        }
        if let Some(bad) = examples.iter().find(|e| e.class_index >= classes.len()) {
            return Err(Error::Argument(format!(
                "class_index {} out of range for {} classes",
                bad.class_index,
                classes.len()
            )));
        }
        Ok(Dataset {
            name: name.into(),
            classes,
            examples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_name(&self, index: usize) -> &str {
        &self.classes[index]
    }

    pub fn examples(&self) -> &[LabeledImage] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for e in &self.examples {
            counts[e.class_index] += 1;
        }
        counts
    }

    /// Positions of the examples of one class, in dataset order.
    pub fn indices_of(&self, class_index: usize) -> Vec<usize> {
        self.examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.class_index == class_index)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            name: self.name.clone(),
            classes: self.classes.clone(),
            counts: self.class_counts(),
            total: self.examples.len(),
        }
    }

    /// Same classes, only the examples at `indices` (in the given order).
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Dataset {
        Dataset {
            name: name.into(),
            classes: self.classes.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    fn check_class(&self, class_index: usize) -> Result<()> {
        if class_index >= self.classes.len() {
            return Err(Error::Argument(format!(
                "class {class_index} out of range for {} classes",
                self.classes.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub classes: Vec<String>,
    pub counts: Vec<usize>,
    pub total: usize,
}

/// How noisy digit variants are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariantSpec {
    pub per_class: usize,
    /// Independent per-pixel flip probability, at most 0.15.
    pub flip_prob: f64,
    /// Maximum translation in pixels (0 or 1), zero fill at the borders.
    pub shift_max: usize,
    pub seed: u64,
}

impl Default for VariantSpec {
    fn default() -> Self {
        VariantSpec {
            per_class: 20,
            flip_prob: 0.13,
            shift_max: 0,
            seed: 0,
        }
    }
}

impl VariantSpec {
    pub fn validate(&self) -> Result<()> {
        if self.per_class == 0 {
            return Err(Error::Argument("per_class must be positive".into()));
        }
        if !(0.0..=0.15).contains(&self.flip_prob) {
            return Err(Error::Argument(format!(
                "flip_prob {} outside [0, 0.15]",
                self.flip_prob
            )));
        }
        if self.shift_max > 1 {
            return Err(Error::Argument(format!(
                "shift_max {} must be 0 or 1",
                self.shift_max
            )));
        }
        Ok(())
    }
}

fn shifted(image: &PixelGrid, dr: i64, dc: i64) -> PixelGrid {
    let mut out = [0.0; GRID_LEN];
    for r in 0..GRID_ROWS as i64 {
        for c in 0..GRID_COLS as i64 {
            let (sr, sc) = (r - dr, c - dc);
            if (0..GRID_ROWS as i64).contains(&sr) && (0..GRID_COLS as i64).contains(&sc) {
                out[(r * GRID_COLS as i64 + c) as usize] = image.get(sr as usize, sc as usize);
            }
        }
    }
    PixelGrid::new(&out).expect("shift keeps values in range")
}

fn digit_classes() -> Vec<String> {
    (0..10).map(|d| d.to_string()).collect()
}

/// Ten classes "0".."9", `per_class` examples each. Example 0 of every class
/// is the glyph itself; the rest are shifted by up to `shift_max` in each
/// axis and then have pixels flipped independently with `flip_prob`.
pub fn make_digit_dataset(glyphs: &GlyphSet, spec: &VariantSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let span = 2 * spec.shift_max as u64 + 1;
    let mut examples = Vec::with_capacity(10 * spec.per_class);
    for (digit, glyph) in glyphs.iter().enumerate() {
        examples.push(LabeledImage {
            image: *glyph,
            class_index: digit,
        });
        for _ in 1..spec.per_class {
            let dr = rng.below(span) as i64 - spec.shift_max as i64;
            let dc = rng.below(span) as i64 - spec.shift_max as i64;
            let base = shifted(glyph, dr, dc);
            let mut px = *base.pixels();
            for v in px.iter_mut() {
                if rng.bernoulli(spec.flip_prob) {
                    *v = 1.0 - *v;
                }
            }
            examples.push(LabeledImage {
                image: PixelGrid::new(&px).expect("flips keep values binary"),
                class_index: digit,
            });
        }
    }
    Dataset::new("digits", digit_classes(), examples)
}

/// Pixel `(r, c)` is lit when `r + c + phase` is even.
pub fn make_checkerboard(phase: u8) -> Result<PixelGrid> {
    if phase > 1 {
        return Err(Error::Argument(format!(
            "checkerboard phase {phase} must be 0 or 1"
        )));
    }
    let mut px = [0.0; GRID_LEN];
    for r in 0..GRID_ROWS {
        for c in 0..GRID_COLS {
            if (r + c + phase as usize).is_multiple_of(2) {
                px[r * GRID_COLS + c] = 1.0;
            }
        }
    }
    PixelGrid::new(&px)
}

/// `n` binary images, each pixel lit independently with probability `density`.
pub fn make_random_images(n: usize, density: f64, seed: u64) -> Result<Vec<PixelGrid>> {
    if n == 0 {
        return Err(Error::Argument("n must be positive".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::Argument(format!("density {density} outside [0, 1]")));
    }
    let mut rng = SeededRng::new(seed);
    Ok((0..n)
        .map(|_| {
            let mut px = [0.0; GRID_LEN];
            for v in px.iter_mut() {
                if rng.bernoulli(density) {
                    *v = 1.0;
                }
            }
            PixelGrid::new(&px).expect("binary pixels")
        })
        .collect())
}

/// A one-class dataset of `n` random images named `class_name`.
pub fn make_random_dataset(n: usize, density: f64, seed: u64, class_name: &str) -> Result<Dataset> {
    let examples = make_random_images(n, density, seed)?
        .into_iter()
        .map(|image| LabeledImage {
            image,
            class_index: 0,
        })
        .collect();
    Dataset::new(
        format!("random-seed{seed}"),
        vec![class_name.to_owned()],
        examples,
    )
}

/// Replaces every example of `class_index` with a fresh random image and
/// renames the class. All other examples are left bit-identical.
pub fn replace_class_with_random(
    ds: &Dataset,
    class_index: usize,
    new_name: &str,
    density: f64,
    seed: u64,
) -> Result<Dataset> {
    ds.check_class(class_index)?;
    let positions = ds.indices_of(class_index);
    let mut examples = ds.examples.clone();
    if !positions.is_empty() {
        let images = make_random_images(positions.len(), density, seed)?;
        for (pos, image) in positions.into_iter().zip(images) {
            examples[pos].image = image;
        }
    }
    let mut classes = ds.classes.clone();
    classes[class_index] = new_name.to_owned();
    Dataset::new(
        format!("{}+random{class_index}", ds.name),
        classes,
        examples,
    )
}

/// Subsamples listed classes to `round(proportion * count)` (at least one),
/// without replacement. Unlisted classes are untouched and dataset order is kept.
pub fn rebalance_classes(
    ds: &Dataset,
    proportions: &BTreeMap<usize, f64>,
    seed: u64,
) -> Result<Dataset> {
    for (&class, &p) in proportions {
        ds.check_class(class)?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Argument(format!(
                "proportion {p} for class {class} outside (0, 1]"
            )));
        }
    }
    if proportions.is_empty() {
        return Ok(ds.clone());
    }
    let mut rng = SeededRng::new(seed);
    let mut dropped = vec![false; ds.examples.len()];
    for (&class, &p) in proportions {
        let mut positions = ds.indices_of(class);
        if positions.is_empty() {
            return Err(Error::Argument(format!(
                "class {class} has no examples to keep"
            )));
        }
        let keep = ((p * positions.len() as f64).round() as usize).max(1);
        rng.shuffle(&mut positions);
        for &pos in &positions[keep..] {
            dropped[pos] = true;
        }
    }
    let examples = ds
        .examples
        .iter()
        .zip(&dropped)
        .filter(|(_, &d)| !d)
        .map(|(e, _)| e.clone())
        .collect();
    Dataset::new(
        format!("{}+rebalanced", ds.name),
        ds.classes.clone(),
        examples,
    )
}
