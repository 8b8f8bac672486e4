use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Dense, DenseNet, LayerSpec, Scalar};
use crate::error::{Error, Result};
use crate::format::{self, PayloadReader};

const MAGIC: &[u8; 8] = b"BOWTAGNN";
pub const MODEL_FORMAT: &str = "dense-v1";

/// JSON header of a model file. Parameter blocks follow in layer order,
/// each layer as its `[out x in]` weights (row-major) then its biases, all
/// little-endian `f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
    /// Owner-specific fields (family, compression, scaling, ...).
    pub metadata: serde_json::Value,
}

pub fn write_model<T: Scalar>(net: &DenseNet<T>, seed: u64, metadata: serde_json::Value) -> Result<Vec<u8>> {
    let header = ModelHeader {
        format: MODEL_FORMAT.to_string(),
        input_dim: net.input_dim(),
        layers: net.specs(),
        seed,
        metadata,
    };
    let mut payload = Vec::with_capacity(net.parameter_count() * 4);
    for layer in net.layers() {
        format::push_f32s(&mut payload, layer.weights.iter().map(|v| v.as_f64() as f32));
        format::push_f32s(&mut payload, layer.bias.iter().map(|v| v.as_f64() as f32));
    }
    format::encode(MAGIC, &header, &payload)
}

pub fn read_model<T: Scalar>(bytes: &[u8]) -> Result<(DenseNet<T>, ModelHeader)> {
    let (header, payload): (ModelHeader, _) = format::decode(MAGIC, bytes)?;
    if header.format != MODEL_FORMAT {
        return Err(Error::Corrupt {
            path: Default::default(),
            reason: format!("unknown model format {}", header.format),
        });
    }
    let mut reader = PayloadReader::new(payload);
    let mut fan_in = header.input_dim;
    let mut layers = Vec::with_capacity(header.layers.len());
    for spec in &header.layers {
        let w = reader.f32s(spec.units * fan_in)?;
        let b = reader.f32s(spec.units)?;
        layers.push(Dense {
            weights: Array2::from_shape_vec((spec.units, fan_in), w)
                .expect("length checked by reader")
                .mapv(|v| T::cast_from(v as f64)),
            bias: Array1::from(b).mapv(|v| T::cast_from(v as f64)),
            activation: spec.activation,
            dropout: spec.dropout,
        });
        fan_in = spec.units;
    }
    reader.finish()?;
    Ok((DenseNet::from_layers(layers)?, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Activation;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn f32_models_round_trip(seed in any::<u64>(), hidden in 1usize..20, out in 1usize..6) {
            let specs = [
                LayerSpec::new(hidden, Activation::Relu, 0.25),
                LayerSpec::new(out, Activation::Sigmoid, 0.0),
            ];
            let net = DenseNet::<f32>::init(7, &specs, seed).unwrap();
            let meta = serde_json::json!({"tag": "x"});
            let bytes = write_model(&net, seed, meta.clone()).unwrap();
            let (back, header) = read_model::<f32>(&bytes).unwrap();
            prop_assert_eq!(&back, &net);
            prop_assert_eq!(&header.metadata, &meta);
            prop_assert_eq!(header.seed, seed);
            prop_assert_eq!(write_model(&back, seed, header.metadata).unwrap(), bytes);
        }
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let net = DenseNet::<f32>::init(3, &[LayerSpec::new(2, Activation::Identity, 0.0)], 1).unwrap();
        let bytes = write_model(&net, 1, serde_json::Value::Null).unwrap();
        assert!(read_model::<f32>(&bytes[..bytes.len() - 2]).is_err());
        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0; 4]);
        assert!(read_model::<f32>(&extra).is_err());
    }
}
