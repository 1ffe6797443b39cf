// Dense H x W x C feature grid standing in for backbone output, with
// integer lookup and differentiable bilinear sampling.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace motkit {

struct FeatureMap {
    int height = 0;
    int width = 0;
    int channels = 0;
    // Cell (y, x) lives in row y * width + x.
    Eigen::MatrixXd values;  // (height * width) x channels

    FeatureMap() = default;
    FeatureMap(int h, int w, int c)
        : height(h), width(w), channels(c),
          values(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h) * w, c)) {}

    Eigen::Index cell(int y, int x) const {
        return static_cast<Eigen::Index>(y) * width + x;
    }
    auto at(int y, int x) { return values.row(cell(y, x)); }
    auto at(int y, int x) const { return values.row(cell(y, x)); }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
};

// Exact vector at an integer grid coordinate.
inline Eigen::VectorXd sample_center_feature(const FeatureMap& f, int x, int y) {
    if (!f.in_bounds(x, y))
        throw std::out_of_range("sample_center_feature: coordinate outside grid");
    return f.at(y, x).transpose();
}

struct BilinearSample {
    Eigen::VectorXd value;   // C-vector
    Eigen::VectorXd ddx;     // d value / d x, per channel
    Eigen::VectorXd ddy;     // d value / d y, per channel
};

// Standard bilinear interpolation of the four surrounding cells.
// Coordinates must lie in [0, W-1] x [0, H-1]; at x = W-1 the support
// cell is the last full column (one-sided, value still exact).
inline BilinearSample bilinear_sample(const FeatureMap& f, double x, double y) {
    if (!(x >= 0.0 && x <= f.width - 1 && y >= 0.0 && y <= f.height - 1))
        throw std::out_of_range("bilinear_sample: coordinate outside grid");
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    if (x0 > f.width - 2) x0 = std::max(0, f.width - 2);
    if (y0 > f.height - 2) y0 = std::max(0, f.height - 2);
    const int x1 = std::min(x0 + 1, f.width - 1);
    const int y1 = std::min(y0 + 1, f.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;

    const auto f00 = f.at(y0, x0);
    const auto f01 = f.at(y0, x1);
    const auto f10 = f.at(y1, x0);
    const auto f11 = f.at(y1, x1);

    BilinearSample out;
    out.value = ((1 - fy) * ((1 - fx) * f00 + fx * f01) +
                 fy * ((1 - fx) * f10 + fx * f11))
                    .transpose();
    out.ddx = ((1 - fy) * (f01 - f00) + fy * (f11 - f10)).transpose();
    out.ddy = ((1 - fx) * (f10 - f00) + fx * (f11 - f01)).transpose();
    return out;
}

} // namespace motkit
