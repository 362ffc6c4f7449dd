#pragma once

#include <cstdint>
#include <vector>

#include "wsn/errors.hpp"

namespace wsn {

// Binary per-cell labels aligned with an N x M x T tensor.
struct LabelGrid {
    std::vector<std::size_t> shape;  // {N, M, T}
    std::vector<std::uint8_t> values;

    LabelGrid() = default;
    LabelGrid(std::size_t n, std::size_t m, std::size_t t)
        : shape{n, m, t}, values(n * m * t, 0) {}

    std::size_t size() const { return values.size(); }

    std::uint8_t& at3(std::size_t i, std::size_t j, std::size_t k) {
        return values[(i * shape[1] + j) * shape[2] + k];
    }
    std::uint8_t at3(std::size_t i, std::size_t j, std::size_t k) const {
        return values[(i * shape[1] + j) * shape[2] + k];
    }

    std::size_t count_positive() const {
        std::size_t c = 0;
        for (auto v : values) c += v != 0;
        return c;
    }
};

}  // namespace wsn
