//! Loss families, block designs, box domains and parameter vectors, together
//! with total/expected loss evaluation and response simulation.

mod data;
mod design;
mod domain;
mod loss;
mod param;

pub(crate) use data::draw_categorical;
pub use data::{
    estimate_c_gamma, expected_total_loss, sample_responses, sample_responses_with, total_loss,
    total_loss_gradient, CGammaEstimate, ModelDocument, TotalLoss,
};
pub use design::DesignSet;
pub use domain::BoxDomain;
pub use loss::{
    loss_by_name, scan_loss_constants, LossConstantsScan, LossFamily, MultinomialLogistic,
};
pub use param::ParamVector;
