//! Per-agent budget ledger.
//!
//! The cap is `base × (1 + extensions)`. Each charge reports the reflection
//! thresholds whose boundary it crossed; thresholds re-arm as fractions of
//! the new cap after every extension, and each fires at most once per
//! extension epoch.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::Pricing;
use crate::gateway::Usage;
use crate::money::Usd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub base: Usd,
    pub cap: Usd,
    pub spent: Usd,
    pub extensions: u32,
    thresholds: Vec<f64>,
    /// (epoch, threshold index) pairs already fired.
    crossed: BTreeSet<(u32, usize)>,
    /// Largest single charge so far.
    pub max_charge: Usd,
}

impl BudgetLedger {
    pub fn new(base: Usd, thresholds: &[f64]) -> Self {
        BudgetLedger {
            base,
            cap: base,
            spent: Usd::ZERO,
            extensions: 0,
            thresholds: thresholds.to_vec(),
            crossed: BTreeSet::new(),
            max_charge: Usd::ZERO,
        }
    }

    pub fn epoch(&self) -> u32 {
        self.extensions
    }

    pub fn at_cap(&self) -> bool {
        self.spent >= self.cap
    }

    /// Spend level at which `fraction` of the current cap is reached.
    pub fn boundary(&self, fraction: f64) -> Usd {
        self.cap.scale(fraction)
    }

    /// Adds `cost` and returns the newly crossed thresholds in ascending order.
    pub fn charge_cost(&mut self, cost: Usd) -> Vec<f64> {
        let before = self.spent;
        self.spent += cost.max(Usd::ZERO);
        self.max_charge = self.max_charge.max(cost);
        let epoch = self.epoch();
        let mut fired = Vec::new();
        for (i, &t) in self.thresholds.iter().enumerate() {
            let b = self.boundary(t);
            if before < b && b <= self.spent && self.crossed.insert((epoch, i)) {
                fired.push(t);
            }
        }
        fired
    }

    /// Grants one more base increment.
    pub fn extend(&mut self) {
        self.extensions += 1;
        self.cap = self.base * i64::from(1 + self.extensions);
    }

    pub fn fired_count(&self) -> usize {
        self.crossed.len()
    }
}

/// Prices `usage` and charges it.
pub fn charge(ledger: &mut BudgetLedger, usage: Usage, pricing: &Pricing) -> (Usd, Vec<f64>) {
    let cost = pricing.cost(usage.input_tokens, usage.output_tokens);
    let crossed = ledger.charge_cost(cost);
    (cost, crossed)
}
