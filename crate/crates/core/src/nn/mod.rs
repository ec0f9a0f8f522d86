//! The LeNet-5 layer stack: sigmoid activations, 2x2 average pooling and
//! valid 5x5 convolutions, with exact backward passes.

mod layers;
mod model;

pub use layers::{
    avgpool2d_backward, avgpool2d_forward, conv2d_backward, conv2d_forward, dense_backward,
    dense_forward, sigmoid, sigmoid_backward, sigmoid_forward, softmax, softmax_backward,
};
pub use model::{
    glorot_bound, ForwardTrace, Layer, LeNetModel, Param, Upstream, FC1_UNITS, FC2_UNITS,
    FLAT_FEATURES, INPUT_SIZE, LAYERS, PARAM_NAMES,
};
