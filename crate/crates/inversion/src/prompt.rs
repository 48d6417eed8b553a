use nalgebra::DVector;

use crate::vocab::Vocabulary;
use crate::InversionError;

/// Slot layout of `a <style> image of <object> <etc>`; `None` marks a
/// pseudo-token.
pub const TEMPLATE: [Option<&str>; 6] = [Some("a"), None, Some("image"), Some("of"), None, None];
/// Slot indices of the style, object and residual pseudo-tokens.
pub const PSEUDO_SLOTS: [usize; 3] = [1, 4, 5];

#[derive(Clone, Debug, PartialEq)]
pub struct PromptEmbedding {
    slots: Vec<DVector<f64>>,
}

impl PromptEmbedding {
    pub fn slots(&self) -> &[DVector<f64>] {
        &self.slots
    }

    /// Style, object and residual embeddings in that order.
    pub fn pseudo(&self, k: usize) -> &DVector<f64> {
        &self.slots[PSEUDO_SLOTS[k]]
    }

    pub fn pseudo_tokens(&self) -> [&DVector<f64>; 3] {
        PSEUDO_SLOTS.map(|i| &self.slots[i])
    }

    /// Replaces pseudo-token `k`; carrier slots cannot be changed.
    pub fn set_pseudo(&mut self, k: usize, value: DVector<f64>) -> Result<(), InversionError> {
        let slot = &mut self.slots[PSEUDO_SLOTS[k]];
        if value.len() != slot.len() {
            return Err(InversionError::DimensionMismatch {
                expected: slot.len(),
                found: value.len(),
            });
        }
        *slot = value;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.slots[0].len()
    }
}

/// Builds the six-slot prompt, looking carrier words up in `vocab`.
pub fn assemble_prompt(
    e_style: DVector<f64>,
    e_object: DVector<f64>,
    e_etc: DVector<f64>,
    vocab: &Vocabulary,
) -> Result<PromptEmbedding, InversionError> {
    let mut pseudo = [e_style, e_object, e_etc].into_iter();
    let mut slots = Vec::with_capacity(TEMPLATE.len());
    for word in TEMPLATE {
        let v = match word {
            Some(w) => vocab
                .embedding(w)
                .ok_or_else(|| InversionError::MissingCarrier(w.to_string()))?,
            None => pseudo.next().expect("three pseudo slots"),
        };
        if v.len() != vocab.dim() {
            return Err(InversionError::DimensionMismatch {
                expected: vocab.dim(),
                found: v.len(),
            });
        }
        slots.push(v);
    }
    Ok(PromptEmbedding { slots })
}
