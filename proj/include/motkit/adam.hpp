// Adam over a list of named parameter blocks (beta1 = 0.9, beta2 = 0.999,
// eps = 1e-8, bias-corrected). Blocks are raw views into model storage so
// the optimizer never owns parameters.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace motkit {

struct ParamBlock {
    std::string name;
    double* value = nullptr;
    const double* grad = nullptr;
    std::size_t size = 0;
};

class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    double learning_rate() const { return lr_; }
    long step_count() const { return step_; }

    void step(const std::vector<ParamBlock>& blocks) {
        if (slots_.empty()) {
            for (const auto& b : blocks)
                slots_.push_back({Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size)),
                                  Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size))});
        }
        if (slots_.size() != blocks.size())
            throw std::invalid_argument("AdamOptimizer: block count changed");

        ++step_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const auto& b = blocks[k];
            auto& s = slots_[k];
            if (static_cast<std::size_t>(s.m.size()) != b.size)
                throw std::invalid_argument("AdamOptimizer: block shape changed: " + b.name);
            for (std::size_t i = 0; i < b.size; ++i) {
                const double g = b.grad[i];
                s.m(static_cast<Eigen::Index>(i)) =
                    beta1_ * s.m(static_cast<Eigen::Index>(i)) + (1.0 - beta1_) * g;
                s.v(static_cast<Eigen::Index>(i)) =
                    beta2_ * s.v(static_cast<Eigen::Index>(i)) + (1.0 - beta2_) * g * g;
                const double mhat = s.m(static_cast<Eigen::Index>(i)) / bc1;
                const double vhat = s.v(static_cast<Eigen::Index>(i)) / bc2;
                b.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    struct Slot {
        Eigen::VectorXd m;
        Eigen::VectorXd v;
    };

    double lr_, beta1_, beta2_, eps_;
    long step_ = 0;
    std::vector<Slot> slots_;
};

} // namespace motkit
