#pragma once

#include <cstddef>
#include <vector>

namespace probembed {

// Dense row-major matrix of doubles; just enough surface for the loss and
// evaluation code.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    Matrix transposed() const {
        Matrix out(cols, rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) out.at(c, r) = at(r, c);
        return out;
    }
};

}  // namespace probembed
