//! Numerical core: dense matrices, the two-head network with its exact
//! gradients, Adam, truncated SVD and checkpoints.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod matrix;
pub mod net;
pub mod svd;

pub use activation::{bce, relu, sigmoid, Activation, BCE_CLAMP};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use matrix::DenseMatrix;
pub use net::{
    apply_adam, forward, init_weights, joint_gradients, joint_gradients_with, joint_loss,
    loss_parts, Biases, DenseGradients, Example, Forward, Gradients, JointModelParams, LossParts,
    NetDims, Workspace,
};
pub use svd::{jacobi_eigen, truncated_svd, SymmetricEigen, TruncatedSvd};
