#pragma once

#include "terra/nn/tensor.hpp"

namespace terra::models {

// One model input. The CNN path fills `spec` (C x F x T); the Mamba path
// fills the raw sequences at their native rates.
struct Example {
    int label = 0;
    nn::Tensor spec;
    nn::Tensor imu;    // T_imu x 6
    nn::Tensor wheel;  // T_wheel x 4
};

}  // namespace terra::models
