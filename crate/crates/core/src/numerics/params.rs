use crate::error::{PrsError, Result};

/// A bundle of trainable parameters exposed as an ordered list of flat slices.
///
/// The slice order is the declared parameter order used by checkpoints and
/// by the optimizer state.
pub trait ParamSet {
    fn param_slices(&self) -> Vec<&[f64]>;

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for s in self.param_slices() {
            out.extend_from_slice(s);
        }
        out
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.num_params();
        if flat.len() != expected {
            return Err(PrsError::Shape(format!(
                "flat parameter vector has {} entries, expected {expected}",
                flat.len()
            )));
        }
        let mut offset = 0;
        for s in self.param_slices_mut() {
            let len = s.len();
            s.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    fn fill_zero(&mut self) {
        for s in self.param_slices_mut() {
            s.fill(0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for s in self.param_slices_mut() {
            for v in s.iter_mut() {
                *v *= factor;
            }
        }
    }

    fn shape_signature(&self) -> Vec<usize> {
        self.param_slices().iter().map(|s| s.len()).collect()
    }
}
