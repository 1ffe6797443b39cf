// Constant-velocity Kalman filter over box state (cx, cy, aspect, height)
// plus velocities, with noise scaled by box height. Used for motion
// prediction and for Mahalanobis-gating the appearance cost matrix.
#pragma once

#include "motkit/assignment.hpp"
#include "motkit/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace motkit {

struct KalmanState {
    // (cx, cy, a, h, vcx, vcy, va, vh); a = width/height.
    Eigen::Matrix<double, 8, 1> mean = Eigen::Matrix<double, 8, 1>::Zero();
    Eigen::Matrix<double, 8, 8> covariance = Eigen::Matrix<double, 8, 8>::Zero();

    BoundingBox to_box() const {
        const double h = mean(3);
        const double w = mean(2) * h;
        return {mean(0) - 0.5 * w, mean(1) - 0.5 * h, w, h};
    }
};

class KalmanFilter {
public:
    // 0.95 chi-square quantile with 4 degrees of freedom; measurements
    // farther than this (squared Mahalanobis) are implausible.
    static constexpr double kDefaultGate = 9.4877;

    KalmanFilter() {
        motion_ = Motion::Identity();
        for (int i = 0; i < 4; ++i) motion_(i, 4 + i) = 1.0;
        observe_ = Observe::Zero();
        for (int i = 0; i < 4; ++i) observe_(i, i) = 1.0;
    }

    KalmanState initiate(const BoundingBox& box) const {
        if (box.area() <= 0.0)
            throw std::invalid_argument("KalmanFilter::initiate: zero-area box");
        KalmanState s;
        s.mean << box.center_x(), box.center_y(), box.width / box.height, box.height,
            0.0, 0.0, 0.0, 0.0;
        const double h = box.height;
        Eigen::Matrix<double, 8, 1> std;
        std << 2 * kStdPos * h, 2 * kStdPos * h, 1e-2, 2 * kStdPos * h,
            10 * kStdVel * h, 10 * kStdVel * h, 1e-5, 10 * kStdVel * h;
        s.covariance = std.array().square().matrix().asDiagonal();
        return s;
    }

    KalmanState predict(const KalmanState& s) const {
        const double h = s.mean(3);
        Eigen::Matrix<double, 8, 1> std;
        std << kStdPos * h, kStdPos * h, 1e-2, kStdPos * h,
            kStdVel * h, kStdVel * h, 1e-5, kStdVel * h;
        KalmanState out;
        out.mean = motion_ * s.mean;
        out.covariance = motion_ * s.covariance * motion_.transpose();
        out.covariance += Eigen::Matrix<double, 8, 8>(std.array().square().matrix().asDiagonal());
        symmetrize(out.covariance);
        return out;
    }

    KalmanState update(const KalmanState& s, const BoundingBox& box) const {
        if (box.area() <= 0.0)
            throw std::invalid_argument("KalmanFilter::update: zero-area box");
        Eigen::Vector4d z(box.center_x(), box.center_y(), box.width / box.height, box.height);

        auto [proj_mean, proj_cov] = project(s);
        Eigen::LDLT<Eigen::Matrix4d> ldlt(proj_cov);
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("KalmanFilter::update: innovation covariance not invertible");

        // K = P H^T S^{-1}
        const Eigen::Matrix<double, 8, 4> pht = s.covariance * observe_.transpose();
        const Eigen::Matrix<double, 8, 4> gain = ldlt.solve(pht.transpose()).transpose();

        KalmanState out;
        out.mean = s.mean + gain * (z - proj_mean);
        out.covariance = s.covariance - gain * proj_cov * gain.transpose();
        symmetrize(out.covariance);
        return out;
    }

    // Squared Mahalanobis distance of a measured box from the predicted
    // measurement distribution (4 dof: cx, cy, a, h).
    double gating_distance(const KalmanState& s, const BoundingBox& box) const {
        Eigen::Vector4d z(box.center_x(), box.center_y(),
                          box.height > 0.0 ? box.width / box.height : 0.0, box.height);
        auto [proj_mean, proj_cov] = project(s);
        const Eigen::Vector4d d = z - proj_mean;
        return d.dot(proj_cov.ldlt().solve(d));
    }

private:
    using Motion = Eigen::Matrix<double, 8, 8>;
    using Observe = Eigen::Matrix<double, 4, 8>;

    static constexpr double kStdPos = 1.0 / 20.0;
    static constexpr double kStdVel = 1.0 / 160.0;

    std::pair<Eigen::Vector4d, Eigen::Matrix4d> project(const KalmanState& s) const {
        const double h = s.mean(3);
        Eigen::Vector4d std(kStdPos * h, kStdPos * h, 1e-1, kStdPos * h);
        Eigen::Matrix4d measurement_cov = std.array().square().matrix().asDiagonal();
        return {observe_ * s.mean,
                observe_ * s.covariance * observe_.transpose() + measurement_cov};
    }

    static void symmetrize(Eigen::Matrix<double, 8, 8>& p) {
        p = 0.5 * (p + p.transpose()).eval();
    }

    Motion motion_;
    Observe observe_;
};

// Marks cost entries whose squared Mahalanobis distance exceeds `gate`
// as infeasible. Orientation: rows = detections, cols = states. Entries
// are either left untouched or set to +inf, never distorted.
inline CostMatrix gate_cost_matrix(const CostMatrix& costs, const KalmanFilter& kf,
                                   const std::vector<KalmanState>& states,
                                   const std::vector<Detection>& dets, double gate) {
    if (costs.rows != static_cast<int>(dets.size()) ||
        costs.cols != static_cast<int>(states.size()))
        throw std::invalid_argument("gate_cost_matrix: dimension mismatch");
    CostMatrix out = costs;
    for (int c = 0; c < out.cols; ++c) {
        for (int r = 0; r < out.rows; ++r) {
            const double d2 = kf.gating_distance(states[static_cast<std::size_t>(c)],
                                                 dets[static_cast<std::size_t>(r)].box);
            if (d2 > gate) out.at(r, c) = CostMatrix::infeasible();
        }
    }
    return out;
}

} // namespace motkit
