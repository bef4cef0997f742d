//! JSON model documents:
//! `{"format_version":1,"config":{..},"layers":[{"weights":[[..]],"biases":[..],"activation":"relu"}]}`.
//! Floats are written in shortest round-trip form, so load(save(net)) is bit-exact.

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, Network, NetworkConfig};
use crate::error::{Error, Result};
use crate::grid::GRID_LEN;

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Serialize)]
struct ModelDocOut<'a> {
    format_version: u64,
    config: &'a NetworkConfig,
    layers: Vec<LayerDocOut<'a>>,
}

#[derive(Serialize)]
struct LayerDocOut<'a> {
    weights: Vec<&'a [f64]>,
    biases: &'a [f64],
    activation: Activation,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocIn {
    #[allow(dead_code)]
    format_version: u64,
    config: NetworkConfig,
    layers: Vec<LayerDocIn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDocIn {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    activation: Activation,
}

pub fn model_save(net: &Network) -> String {
    let doc = ModelDocOut {
        format_version: MODEL_FORMAT_VERSION,
        config: &net.config,
        layers: net
            .layers
            .iter()
            .map(|l| LayerDocOut {
                weights: l.weights.chunks_exact(l.units_in).collect(),
                biases: &l.biases,
                activation: l.activation,
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("model document serializes")
}

/// Reads `format_version` before anything else so a newer document fails
/// with a version error rather than a schema error.
pub(crate) fn check_format_version(value: &serde_json::Value, expected: u64) -> Result<()> {
    let found = value
        .get("format_version")
        .ok_or_else(|| Error::load("format_version", "missing"))?
        .as_u64()
        .ok_or_else(|| Error::load("format_version", "must be a non-negative integer"))?;
    if found != expected {
        return Err(Error::Version { found, expected });
    }
    Ok(())
}

pub(crate) fn parse_with_path<T: serde::de::DeserializeOwned>(
    value: serde_json::Value,
) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::load(
            if path == "." { String::new() } else { path },
            e.into_inner().to_string(),
        )
    })
}

pub fn model_load(text: &str) -> Result<Network> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::load("", format!("malformed JSON: {e}")))?;
    check_format_version(&value, MODEL_FORMAT_VERSION)?;
    let doc: ModelDocIn = parse_with_path(value)?;

    doc.config.validate().map_err(|e| match e {
        Error::Config { path, message } => Error::load(format!("config.{}", path.0), message),
        other => other,
    })?;

    let shapes = doc.config.dense_shapes();
    if doc.layers.len() != shapes.len() {
        return Err(Error::load(
            "layers",
            format!(
                "expected {} layers for this config, found {}",
                shapes.len(),
                doc.layers.len()
            ),
        ));
    }

    let mut units_in = GRID_LEN;
    let mut layers = Vec::with_capacity(shapes.len());
    for (k, (layer, (units_out, activation))) in doc.layers.into_iter().zip(shapes).enumerate() {
        if layer.weights.len() != units_out {
            return Err(Error::load(
                format!("layers[{k}].weights"),
                format!("expected {units_out} rows, found {}", layer.weights.len()),
            ));
        }
        let mut flat = Vec::with_capacity(units_out * units_in);
        for (r, row) in layer.weights.iter().enumerate() {
            if row.len() != units_in {
                return Err(Error::load(
                    format!("layers[{k}].weights[{r}]"),
                    format!("expected {units_in} columns, found {}", row.len()),
                ));
            }
            flat.extend_from_slice(row);
        }
        if layer.biases.len() != units_out {
            return Err(Error::load(
                format!("layers[{k}].biases"),
                format!("expected {units_out} entries, found {}", layer.biases.len()),
            ));
        }
        if layer.activation != activation {
            return Err(Error::load(
                format!("layers[{k}].activation"),
                format!(
                    "{} does not match config ({})",
                    layer.activation.name(),
                    activation.name()
                ),
            ));
        }
        if flat.iter().chain(&layer.biases).any(|x| !x.is_finite()) {
            return Err(Error::load(format!("layers[{k}]"), "non-finite parameter"));
        }
        layers.push(DenseLayer::from_parts(
            units_in,
            units_out,
            flat,
            layer.biases,
            activation,
        ));
        units_in = units_out;
    }
    Network::from_layers(doc.config, layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PixelGrid;
    use crate::rng::SeededRng;

    fn net() -> Network {
        Network::new(NetworkConfig::default().with_seed(42)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut n = net();
        // Force some awkward values through the text form.
        n.layers_mut()[0].weights_mut()[0] = 0.1 + 0.2;
        n.layers_mut()[1].biases_mut()[3] = -1.0 / 3.0;
        let text = model_save(&n);
        let back = model_load(&text).unwrap();
        assert_eq!(back, n);
        assert_eq!(model_save(&back), text);

        let mut r = SeededRng::new(0);
        for _ in 0..50 {
            let v: Vec<f64> = (0..36).map(|_| r.unit()).collect();
            let g = PixelGrid::new(&v).unwrap();
            assert_eq!(n.probabilities(&g), back.probabilities(&g));
        }
    }

    #[test]
    fn document_shape() {
        let text = model_save(&net());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["layers"][0]["activation"], "relu");
        assert_eq!(v["layers"][0]["weights"].as_array().unwrap().len(), 20);
        assert_eq!(v["layers"][0]["weights"][0].as_array().unwrap().len(), 36);
        assert_eq!(v["layers"][1]["activation"], "softmax");
        assert_eq!(v["config"]["seed"], 42);
    }

    #[test]
    fn wrong_row_count_names_layer() {
        let mut v: serde_json::Value = serde_json::from_str(&model_save(&net())).unwrap();
        v["layers"][1]["weights"].as_array_mut().unwrap().pop();
        let err = model_load(&v.to_string()).unwrap_err();
        assert_eq!(err.field_path().unwrap().0, "layers[1].weights");
        assert!(err.to_string().contains("expected 10 rows"));
    }

    #[test]
    fn version_mismatch() {
        let mut v: serde_json::Value = serde_json::from_str(&model_save(&net())).unwrap();
        v["format_version"] = 999.into();
        assert!(matches!(
            model_load(&v.to_string()),
            Err(Error::Version {
                found: 999,
                expected: 1
            })
        ));
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(model_load("{"), Err(Error::Load { .. })));
        assert!(matches!(model_load("{}"), Err(Error::Load { .. })));

        let mut v: serde_json::Value = serde_json::from_str(&model_save(&net())).unwrap();
        v["layers"][0]["biases"][2] = "x".into();
        let err = model_load(&v.to_string()).unwrap_err();
        assert_eq!(err.field_path().unwrap().0, "layers[0].biases[2]");

        let mut v: serde_json::Value = serde_json::from_str(&model_save(&net())).unwrap();
        v["config"]["hidden"][0]["units"] = 0.into();
        let err = model_load(&v.to_string()).unwrap_err();
        assert_eq!(err.field_path().unwrap().0, "config.hidden[0].units");

        let mut v: serde_json::Value = serde_json::from_str(&model_save(&net())).unwrap();
        v["layers"][0]["weights"][4]
            .as_array_mut()
            .unwrap()
            .push(0.0.into());
        let err = model_load(&v.to_string()).unwrap_err();
        assert_eq!(err.field_path().unwrap().0, "layers[0].weights[4]");
    }
}
