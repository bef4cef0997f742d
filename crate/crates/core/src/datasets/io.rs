//! JSON dataset documents:
//! `{"format_version":1,"name":"..","classes":[..],"examples":[{"pixels":[36 reals],"class_index":0}]}`.

use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::grid::{PixelGrid, GRID_LEN};
use crate::network::model_io::{check_format_version, parse_with_path};

pub const DATASET_FORMAT_VERSION: u64 = 1;

#[derive(Serialize)]
struct DatasetDocOut<'a> {
    format_version: u64,
    name: &'a str,
    classes: &'a [String],
    examples: Vec<ExampleDocOut<'a>>,
}

#[derive(Serialize)]
struct ExampleDocOut<'a> {
    pixels: &'a PixelGrid,
    class_index: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetDocIn {
    #[allow(dead_code)]
    format_version: u64,
    name: String,
    classes: Vec<String>,
    examples: Vec<ExampleDocIn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleDocIn {
    pixels: Vec<f64>,
    class_index: usize,
}

pub fn dataset_save(ds: &Dataset) -> String {
    let doc = DatasetDocOut {
        format_version: DATASET_FORMAT_VERSION,
        name: &ds.name,
        classes: &ds.classes,
        examples: ds
            .examples
            .iter()
            .map(|e| ExampleDocOut {
                pixels: &e.image,
                class_index: e.class_index,
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("dataset document serializes")
}

pub fn dataset_load(text: &str) -> Result<Dataset> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::load("", format!("malformed JSON: {e}")))?;
    check_format_version(&value, DATASET_FORMAT_VERSION)?;
    let doc: DatasetDocIn = parse_with_path(value)?;

    if doc.classes.is_empty() {
        return Err(Error::load("classes", "must not be empty"));
    }
    for (i, c) in doc.classes.iter().enumerate() {
        if doc.classes[..i].contains(c) {
            return Err(Error::load(
                format!("classes[{i}]"),
                format!("duplicate class {c:?}"),
            ));
        }
    }
    let mut examples = Vec::with_capacity(doc.examples.len());
    for (i, e) in doc.examples.into_iter().enumerate() {
        if e.pixels.len() != GRID_LEN {
            return Err(Error::load(
                format!("examples[{i}].pixels"),
                format!("expected {GRID_LEN} values, found {}", e.pixels.len()),
            ));
        }
        if let Some(p) = e.pixels.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::load(
                format!("examples[{i}].pixels[{p}]"),
                format!("{} is outside the bounds [0, 1]", e.pixels[p]),
            ));
        }
        if e.class_index >= doc.classes.len() {
            return Err(Error::load(
                format!("examples[{i}].class_index"),
                format!(
                    "{} out of range for {} classes",
                    e.class_index,
                    doc.classes.len()
                ),
            ));
        }
        examples.push(LabeledImage {
            image: PixelGrid::new(&e.pixels)?,
            class_index: e.class_index,
        });
    }
    Dataset::new(doc.name, doc.classes, examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{make_digit_dataset, GlyphSet, VariantSpec};

    fn sample() -> Dataset {
        make_digit_dataset(
            &GlyphSet::standard(),
            &VariantSpec {
                per_class: 3,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let ds = sample();
        let text = dataset_save(&ds);
        assert_eq!(dataset_load(&text).unwrap(), ds);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["examples"][0]["pixels"].as_array().unwrap().len(), 36);
    }

    #[test]
    fn pixel_out_of_bounds() {
        let mut v: serde_json::Value = serde_json::from_str(&dataset_save(&sample())).unwrap();
        v["examples"][4]["pixels"][7] = 1.5.into();
        let err = dataset_load(&v.to_string()).unwrap_err();
        assert_eq!(err.field_path().unwrap().0, "examples[4].pixels[7]");
        assert!(err.to_string().contains("bounds"));
    }

    #[test]
    fn class_index_out_of_range() {
        let mut v: serde_json::Value = serde_json::from_str(&dataset_save(&sample())).unwrap();
        v["examples"][0]["class_index"] = 10.into();
        let err = dataset_load(&v.to_string()).unwrap_err();
        assert_eq!(err.field_path().unwrap().0, "examples[0].class_index");
    }

    #[test]
    fn malformed() {
        assert!(dataset_load("[").is_err());
        let mut v: serde_json::Value = serde_json::from_str(&dataset_save(&sample())).unwrap();
        v["format_version"] = 2.into();
        assert!(matches!(
            dataset_load(&v.to_string()),
            Err(Error::Version { .. })
        ));
        let mut v: serde_json::Value = serde_json::from_str(&dataset_save(&sample())).unwrap();
        v["examples"][1]["pixels"].as_array_mut().unwrap().pop();
        let err = dataset_load(&v.to_string()).unwrap_err();
        assert_eq!(err.field_path().unwrap().0, "examples[1].pixels");
    }
}
