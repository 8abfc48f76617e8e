//! Late-fusion classifier, physics features and the physics-informed loss.
//!
//! The penalty as a piecewise function of the argmax class carries no
//! parameter gradient. [`PenaltyMode::SoftProbability`] (the default) weights
//! each class's hinge by its softmax probability so that the penalty shapes
//! training; [`PenaltyMode::HardArgmax`] keeps the piecewise value for
//! reporting.

mod embed;
mod features;
mod loss;
mod net;

pub use embed::export_embeddings;
pub use features::{extract_physics_features, PhysicsFeatures, PhysicsNormalizer};
pub use loss::{
    argmax, hard_penalty, is_sub_threshold_fault, physics_informed_loss, physics_penalty, soft_penalty,
    PenaltyMode, PhysicsLoss, PhysicsLossConfig,
};
pub use net::{ArchConfig, ModelInput, MultimodalNet, Prediction, HEAD, PHYSICS_BRANCH};
