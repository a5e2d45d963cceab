#pragma once

#include <cstddef>

#include "uavguard/matrix.hpp"

namespace uavguard {

// Anything that maps an input window (input_rows x features) to an output
// block (output_rows x features). Reconstruction models have
// output_rows == input_rows; forecasters emit the next output_rows steps.
class Predictor {
public:
    virtual ~Predictor() = default;

    virtual std::size_t input_rows() const = 0;
    virtual std::size_t output_rows() const = 0;
    virtual std::size_t feature_count() const = 0;
    virtual Matrix predict(const Matrix& window) const = 0;
};

} // namespace uavguard
