use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError};
use crate::autodiff::{Tape, Tensor, Var};

/// Range of the uniform weight initialization.
pub const INIT_RANGE: f64 = 0.1;

/// Every trainable tensor, in checkpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKey {
    Embedding,
    EncoderForwardW,
    EncoderForwardB,
    EncoderBackwardW,
    EncoderBackwardB,
    ReduceHiddenW,
    ReduceHiddenB,
    ReduceCellW,
    ReduceCellB,
    DecoderW,
    DecoderB,
    AttnEncoderW,
    AttnDecoderW,
    AttnB,
    AttnV,
    GateW,
    GateB,
    OutputW,
    OutputB,
}

impl ParamKey {
    pub const ALL: [ParamKey; 19] = [
        ParamKey::Embedding,
        ParamKey::EncoderForwardW,
        ParamKey::EncoderForwardB,
        ParamKey::EncoderBackwardW,
        ParamKey::EncoderBackwardB,
        ParamKey::ReduceHiddenW,
        ParamKey::ReduceHiddenB,
        ParamKey::ReduceCellW,
        ParamKey::ReduceCellB,
        ParamKey::DecoderW,
        ParamKey::DecoderB,
        ParamKey::AttnEncoderW,
        ParamKey::AttnDecoderW,
        ParamKey::AttnB,
        ParamKey::AttnV,
        ParamKey::GateW,
        ParamKey::GateB,
        ParamKey::OutputW,
        ParamKey::OutputB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamKey::Embedding => "embedding",
            ParamKey::EncoderForwardW => "encoder.forward.w",
            ParamKey::EncoderForwardB => "encoder.forward.b",
            ParamKey::EncoderBackwardW => "encoder.backward.w",
            ParamKey::EncoderBackwardB => "encoder.backward.b",
            ParamKey::ReduceHiddenW => "reduce.hidden.w",
            ParamKey::ReduceHiddenB => "reduce.hidden.b",
            ParamKey::ReduceCellW => "reduce.cell.w",
            ParamKey::ReduceCellB => "reduce.cell.b",
            ParamKey::DecoderW => "decoder.w",
            ParamKey::DecoderB => "decoder.b",
            ParamKey::AttnEncoderW => "attention.encoder.w",
            ParamKey::AttnDecoderW => "attention.decoder.w",
            ParamKey::AttnB => "attention.b",
            ParamKey::AttnV => "attention.v",
            ParamKey::GateW => "gate.w",
            ParamKey::GateB => "gate.b",
            ParamKey::OutputW => "output.w",
            ParamKey::OutputB => "output.b",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_bias(self) -> bool {
        matches!(
            self,
            ParamKey::EncoderForwardB
                | ParamKey::EncoderBackwardB
                | ParamKey::ReduceHiddenB
                | ParamKey::ReduceCellB
                | ParamKey::DecoderB
                | ParamKey::AttnB
                | ParamKey::GateB
                | ParamKey::OutputB
        )
    }

    /// `[rows, cols]` for this tensor under `config`.
    pub fn shape(self, config: &ModelConfig) -> [usize; 2] {
        let h = config.hidden_size;
        let e = config.embedding_size;
        let v = config.vocab_size;
        match self {
            ParamKey::Embedding => [v, e],
            ParamKey::EncoderForwardW | ParamKey::EncoderBackwardW => [e + h, 4 * h],
            ParamKey::EncoderForwardB | ParamKey::EncoderBackwardB | ParamKey::DecoderB => [1, 4 * h],
            ParamKey::ReduceHiddenW | ParamKey::ReduceCellW => [2 * h, h],
            ParamKey::ReduceHiddenB | ParamKey::ReduceCellB => [1, h],
            // decoder input is [embedding; previous context], plus recurrent h
            ParamKey::DecoderW => [e + 2 * h + h, 4 * h],
            ParamKey::AttnEncoderW => [2 * h, h],
            ParamKey::AttnDecoderW => [h, h],
            ParamKey::AttnB => [1, h],
            ParamKey::AttnV => [h, 1],
            // [context; decoder state; decoder input]
            ParamKey::GateW => [2 * h + h + e + 2 * h, 1],
            ParamKey::GateB => [1, 1],
            ParamKey::OutputW => [h + 2 * h, v],
            ParamKey::OutputB => [1, v],
        }
    }
}

/// All trainable weights, indexed by [`ParamKey`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    tensors: Vec<Tensor>,
}

impl ModelParams {
    /// Uniform `[-0.1, 0.1]` weights and zero biases from a seeded generator.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = ParamKey::ALL
            .iter()
            .map(|&key| {
                let [r, c] = key.shape(config);
                if key.is_bias() {
                    Tensor::zeros(r, c)
                } else {
                    let data = (0..r * c).map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE)).collect();
                    Tensor::matrix(r, c, data)
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    /// Every value (biases included) uniform in `[-range, range]`. Used for
    /// gradient checks and property tests away from the initialization point.
    pub fn random(config: &ModelConfig, seed: u64, range: f64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = ParamKey::ALL
            .iter()
            .map(|&key| {
                let [r, c] = key.shape(config);
                Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-range..=range)).collect())
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    /// Assembles parameters from tensors in [`ParamKey::ALL`] order, checking
    /// every shape against `config`.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Tensor>) -> Result<Self, ModelError> {
        config.validate()?;
        if tensors.len() != ParamKey::ALL.len() {
            return Err(ModelError::ParamCount {
                expected: ParamKey::ALL.len(),
                got: tensors.len(),
            });
        }
        for (key, t) in ParamKey::ALL.iter().zip(&tensors) {
            if t.shape() != key.shape(&config) {
                return Err(ModelError::ParamShape {
                    name: key.name(),
                    expected: key.shape(&config).to_vec(),
                    got: t.shape().to_vec(),
                });
            }
            if !t.is_finite() {
                return Err(ModelError::NonFinite(key.name()));
            }
        }
        Ok(Self { config, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, key: ParamKey) -> &Tensor {
        &self.tensors[key.index()]
    }

    pub fn get_mut(&mut self, key: ParamKey) -> &mut Tensor {
        &mut self.tensors[key.index()]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Puts every tensor on `tape`, as trainable leaves when `trainable`.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> ParamVars {
        let vars = self
            .tensors
            .iter()
            .map(|t| {
                if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect();
        ParamVars { vars }
    }
}

/// Tape handles for every parameter, indexed by [`ParamKey`].
#[derive(Debug, Clone)]
pub struct ParamVars {
    vars: Vec<Var>,
}

impl ParamVars {
    /// Wraps externally registered leaves given in [`ParamKey::ALL`] order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        assert_eq!(vars.len(), ParamKey::ALL.len(), "one var per parameter");
        Self { vars }
    }

    pub fn get(&self, key: ParamKey) -> Var {
        self.vars[key.index()]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_and_ranges() {
        let cfg = ModelConfig::tiny(12);
        let p = ModelParams::init(&cfg, 1).unwrap();
        for key in ParamKey::ALL {
            let t = p.get(key);
            assert_eq!(t.shape(), key.shape(&cfg));
            if key.is_bias() {
                assert!(t.data().iter().all(|&v| v == 0.0));
            } else {
                assert!(t.data().iter().all(|v| v.abs() <= INIT_RANGE));
            }
        }
        assert_eq!(p, ModelParams::init(&cfg, 1).unwrap());
        assert_ne!(p, ModelParams::init(&cfg, 2).unwrap());
    }

    #[test]
    fn names_round_trip() {
        for key in ParamKey::ALL {
            assert_eq!(ParamKey::from_name(key.name()), Some(key));
        }
        for (i, key) in ParamKey::ALL.iter().enumerate() {
            assert_eq!(key.index(), i);
        }
    }

    #[test]
    fn from_tensors_checks_shapes() {
        let cfg = ModelConfig::tiny(12);
        let p = ModelParams::init(&cfg, 1).unwrap();
        let mut tensors = p.tensors().to_vec();
        tensors[0] = Tensor::zeros(3, 3);
        assert!(matches!(
            ModelParams::from_tensors(cfg.clone(), tensors),
            Err(ModelError::ParamShape { .. })
        ));
        assert!(ModelParams::from_tensors(cfg, p.tensors()[1..].to_vec()).is_err());
    }
}
