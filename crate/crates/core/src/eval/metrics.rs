use crate::error::{Error, Result};

/// Fraction of positions where `predictions` and `gold` agree.
pub fn accuracy(predictions: &[u8], gold: &[u8]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Size("accuracy of an empty set".into()));
    }
    let hits = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / gold.len() as f64)
}
