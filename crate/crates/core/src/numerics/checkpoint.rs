use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PrsError, Result};

pub const CHECKPOINT_FORMAT: &str = "prs-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized model: kind tag, named dimensions, non-trainable constants and
/// the flat parameter vector in declared order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub seed: u64,
    pub dims: BTreeMap<String, usize>,
    pub constants: BTreeMap<String, f64>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, seed: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            kind: kind.into(),
            seed,
            dims: BTreeMap::new(),
            constants: BTreeMap::new(),
            params: Vec::new(),
        }
    }

    pub fn dim(&self, key: &str) -> Result<usize> {
        self.dims
            .get(key)
            .copied()
            .ok_or_else(|| PrsError::Format(format!("checkpoint missing dimension `{key}`")))
    }

    pub fn constant(&self, key: &str) -> Result<f64> {
        self.constants
            .get(key)
            .copied()
            .ok_or_else(|| PrsError::Format(format!("checkpoint missing constant `{key}`")))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(PrsError::Format(format!(
                "checkpoint holds a `{}` model, expected `{kind}`",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| PrsError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(PrsError::Format(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        if ckpt.params.iter().any(|v| !v.is_finite()) {
            return Err(PrsError::Format(
                "checkpoint holds non-finite parameters".into(),
            ));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_string_pretty();
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_str(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(params in proptest::collection::vec(-1e6f64..1e6, 0..64), seed: u64) {
            let mut ckpt = Checkpoint::new("mlp", seed);
            ckpt.dims.insert("input".into(), params.len());
            ckpt.constants.insert("mean".into(), 0.1 + 0.2);
            ckpt.params = params;
            let back = Checkpoint::from_str(&ckpt.to_string_pretty()).unwrap();
            prop_assert_eq!(
                back.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                ckpt.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!(back, ckpt);
        }
    }

    #[test]
    fn rejects_wrong_version() {
        let mut ckpt = Checkpoint::new("mlp", 0);
        ckpt.version = 99;
        assert!(matches!(
            Checkpoint::from_str(&ckpt.to_string_pretty()),
            Err(PrsError::Format(_))
        ));
    }
}
