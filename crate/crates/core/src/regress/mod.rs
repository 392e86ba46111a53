//! Linear regression baseline and the extreme-learning-machine ensemble.

mod activation;
mod cv;
mod elm;
mod ensemble;
mod linear;

pub use activation::{activation_value, ActivationKind};
pub use cv::{cross_validate, default_node_grid, select_node_count, CvConfig, CvOutcome};
pub use elm::{elm_predict, elm_train, elm_train_with, ElmConfig, ElmModel, HiddenInit};
pub use ensemble::{
    ensemble_predict, ensemble_train, ensemble_train_with, trimmed_mean, EnsembleModel, TrimPolicy,
    DEFAULT_MEMBERS,
};
pub use linear::{lr_fit, lr_predict, LinearModel};
