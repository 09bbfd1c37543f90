//! HDMR neural-network surrogate of the macroscopic energy density, with
//! exact analytical stress (gradient) and tangent (Hessian).

mod model;
mod train;

pub use model::{
    ComponentNet, ExtrapolationWarning, HdmrModel, Normalization, EXTRAPOLATION_MARGIN,
    MODEL_FORMAT_VERSION,
};
pub use train::{
    rmse, train, train_with_validation, Architecture, Optimizer, TrainOptions, TrainReport,
};
