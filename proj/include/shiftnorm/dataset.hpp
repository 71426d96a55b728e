#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftnorm/matrix.hpp"

namespace shiftnorm {

// Labeled classification data: one sample per matrix row, integer labels.
struct Dataset {
    Matrix x;
    std::vector<int> y;

    std::size_t size() const { return x.rows(); }
    std::size_t dim() const { return x.cols(); }

    // Rows selected by index, in the given order.
    Dataset subset(const std::vector<std::size_t>& indices) const;

    // Deterministically shuffled copy.
    Dataset shuffled(std::uint64_t seed) const;

    // Feature columns f0..f{D-1} followed by the label column y.
    std::string to_csv() const;
    static Dataset from_csv(const std::string& text);
};

} // namespace shiftnorm
