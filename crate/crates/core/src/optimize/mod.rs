//! Training dynamics: step-size schedules and weight-decay rules, online SGD on
//! the first layer, gradient descent on Monte-Carlo population gradients,
//! second-layer SGD on stored samples, and the two-phase single-index learner.

mod algorithm1;
mod grad;
mod pgd;
mod schedule;
mod second_layer;
mod sgd;

pub use algorithm1::{
    algorithm1, bias_range, default_t_star, excess_truncated_risk, Algorithm1Config, Algorithm1Diagnostics,
    ExcessRisk, LambdaPrime, DEFAULT_DELTA_CONF,
};
pub use grad::grad_first_layer;
pub use pgd::{pgd_run, pgd_with_oracle};
pub use schedule::{relu_curvature_constant, select_weight_decay, StepKind, StepSchedule, WeightDecayRule};
pub use second_layer::{regularized_empirical_risk, train_second_layer, FeatureCache};
pub use sgd::{
    default_checkpoint_every, sgd_train_first_layer, sgd_train_first_layer_recording, MetricsRow, SgdConfig,
    TrainTrajectory, DATA_STREAM, DIVERGENCE_NORM, RISK_WINDOW, TRAJECTORY_HEADER,
};
