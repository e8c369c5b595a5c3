#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stitch {

struct Shape4 {
    int b = 0, c = 0, h = 0, w = 0;

    bool operator==(const Shape4&) const = default;

    std::size_t numel() const {
        return static_cast<std::size_t>(b) * c * h * w;
    }
    std::string str() const {
        return "(" + std::to_string(b) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

// Dense rank-4 array in row-major (b, c, h, w) order, float64 throughout.
// `grad` is either empty or the same length as `data`.
struct Tensor4 {
    Shape4 shape;
    std::vector<double> data;
    std::vector<double> grad;

    Tensor4() = default;
    Tensor4(int b, int c, int h, int w, double fill = 0.0)
        : shape{b, c, h, w} {
        if (b < 0 || c < 0 || h < 0 || w < 0)
            throw std::invalid_argument("Tensor4: negative dimension");
        data.assign(shape.numel(), fill);
    }
    explicit Tensor4(Shape4 s, double fill = 0.0)
        : Tensor4(s.b, s.c, s.h, s.w, fill) {}

    std::size_t idx(int b, int c, int y, int x) const {
        return ((static_cast<std::size_t>(b) * shape.c + c) * shape.h + y) * shape.w + x;
    }
    double& at(int b, int c, int y, int x) { return data[idx(b, c, y, x)]; }
    double at(int b, int c, int y, int x) const { return data[idx(b, c, y, x)]; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() {
        grad.assign(data.size(), 0.0);
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_shape(const Tensor4& a, const Tensor4& b, const char* where) {
    if (!(a.shape == b.shape))
        throw std::invalid_argument(std::string(where) + ": shape mismatch " +
                                    a.shape.str() + " vs " + b.shape.str());
}

// Error raised when a computation produces NaN/Inf or hits a degenerate
// configuration (singular homography, empty overlap, diverging training).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Error raised for bad input data (missing files, undecodable images,
// mismatched sizes) as opposed to programmer errors.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace stitch
