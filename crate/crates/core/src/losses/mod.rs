//! Task and regularization losses with their gradients.
//!
//! Complex gradients use the `∂/∂Re + i ∂/∂Im` convention throughout.

mod fields;
mod points;
mod regularizers;

pub use fields::{dice_loss, ncc, ncc_grad, soft_dice_grad};
pub use points::{
    chamfer, chamfer_grad, landmark_l2, landmark_l2_grad, landmark_task, landmark_task_grad, CurveDistance,
    CurvePoints, LandmarkCurve, LandmarkSpec,
};
pub use regularizers::{
    bc_magnitude, bc_smoothness, boundary_matching, folding_penalty, BcSmoothness, LossWeights, SeamSmoothness,
};
