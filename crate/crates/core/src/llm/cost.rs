use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LedgerEntry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrice {
    pub usd_per_1k_input: f64,
    pub usd_per_1k_output: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriceTable {
    pub models: BTreeMap<String, ModelPrice>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("no price for model `{0}`")]
    Unpriced(String),
    #[error("negative rate for model `{0}`")]
    NegativeRate(String),
}

/// Azure GPT-4o list price as of 2024-08-15.
pub const GPT4O_PRICE: ModelPrice = ModelPrice { usd_per_1k_input: 0.005, usd_per_1k_output: 0.015 };

impl PriceTable {
    pub fn gpt4o() -> Self {
        let mut models = BTreeMap::new();
        for id in ["gpt-4o", "gpt-4o-2024-05-13"] {
            models.insert(id.to_string(), GPT4O_PRICE);
        }
        Self { models }
    }

    pub fn with(mut self, model: impl Into<String>, price: ModelPrice) -> Self {
        self.models.insert(model.into(), price);
        self
    }
}

/// Rate in nano-dollars per token. Rates are resolved to 1e-6 USD per 1k tokens.
fn nanos_per_token(usd_per_1k: f64) -> u128 {
    (usd_per_1k * 1e6).round() as u128
}

/// Exact integer cost in nano-dollars; additive over any split of `entries`.
pub fn estimate_cost_nanos(entries: &[LedgerEntry], prices: &PriceTable) -> Result<u128, CostError> {
    let mut total = 0u128;
    for e in entries {
        let price = prices.models.get(&e.model_id).ok_or_else(|| CostError::Unpriced(e.model_id.clone()))?;
        if price.usd_per_1k_input < 0.0 || price.usd_per_1k_output < 0.0 {
            return Err(CostError::NegativeRate(e.model_id.clone()));
        }
        total += e.input_tokens as u128 * nanos_per_token(price.usd_per_1k_input)
            + e.output_tokens as u128 * nanos_per_token(price.usd_per_1k_output);
    }
    Ok(total)
}

/// `Σ input/1000 · in_rate + output/1000 · out_rate`, in USD.
pub fn estimate_cost(entries: &[LedgerEntry], prices: &PriceTable) -> Result<f64, CostError> {
    estimate_cost_nanos(entries, prices).map(|n| n as f64 / 1e9)
}
