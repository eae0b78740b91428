//! Cox proportional-hazards association: the partial loss, per-marker
//! Bayes factors, spike-and-slab variable selection and a synthetic data
//! generator.
//!
//! The loss weight is fixed at one throughout, so `exp(-loss)` is the
//! partial likelihood itself.

mod bayes_factor;
mod cox;
mod data;
mod selection;
mod simulate;

pub use bayes_factor::{single_marker_bf, BfFlag, BfMethod, MarkerBf};
pub use cox::CoxLoss;
pub use data::{RiskIndex, SurvivalDataset};
pub use selection::{inclusion_probabilities, variable_selection_mcmc, ModelState, SelectionChain, SelectionConfig, DEFAULT_MODEL_CAP};
pub use simulate::{simulate_cox_data, CoxSimulation};
