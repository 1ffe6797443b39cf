// Trajectory-level contrastive loss (InfoNCE against bank centers) and
// the uncertainty-weighted total loss, with analytic gradients. Centers
// are treated as constants: they are never updated by the optimizer.
#pragma once

#include "motkit/bank.hpp"
#include "motkit/core.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace motkit {

struct InfoNceResult {
    double loss = 0.0;
    Eigen::VectorXd grad_view;  // dLoss / d v
};

// -log( exp(v.c_l / tau) / sum_i exp(v.c_i / tau) ), max-shifted for
// stability. Never-updated (zero) centers are excluded from the
// denominator except c_l itself: a trajectory not yet seen this epoch
// would otherwise contribute a constant exp(0) noise term.
inline InfoNceResult info_nce(const Embedding& v, const TrajectoryCenterBank& bank, int label,
                              double tau, bool exclude_zero_centers = true) {
    if (label < 0 || label >= bank.size())
        throw std::out_of_range("info_nce: label out of range");
    if (!(tau > 0.0)) throw std::invalid_argument("info_nce: tau must be > 0");
    if (v.size() != bank.dim()) throw std::invalid_argument("info_nce: dimension mismatch");

    const Eigen::MatrixXd& centers = centers_of(bank);
    std::vector<int> included;
    included.reserve(static_cast<std::size_t>(bank.size()));
    for (int i = 0; i < bank.size(); ++i)
        if (i == label || !exclude_zero_centers || !bank.is_zero(i)) included.push_back(i);

    Eigen::VectorXd logits(static_cast<Eigen::Index>(included.size()));
    Eigen::Index positive_pos = 0;
    for (std::size_t k = 0; k < included.size(); ++k) {
        logits(static_cast<Eigen::Index>(k)) = centers.row(included[k]).dot(v.transpose()) / tau;
        if (included[k] == label) positive_pos = static_cast<Eigen::Index>(k);
    }

    const double shift = logits.maxCoeff();
    const Eigen::VectorXd expv = (logits.array() - shift).exp();
    const double denom = expv.sum();
    const double log_denom = shift + std::log(denom);

    InfoNceResult out;
    out.loss = log_denom - logits(positive_pos);
    out.grad_view = Eigen::VectorXd::Zero(v.size());
    for (std::size_t k = 0; k < included.size(); ++k) {
        const double softmax_k = expv(static_cast<Eigen::Index>(k)) / denom;
        out.grad_view += (softmax_k / tau) * centers.row(included[k]).transpose();
    }
    out.grad_view -= centers.row(label).transpose() / tau;
    return out;
}

struct LabeledView {
    Embedding vector;  // unit-norm appearance vector
    int label = 0;     // bank index of its trajectory
};

struct TclLossResult {
    double loss = 0.0;
    std::vector<Eigen::VectorXd> grad_views;  // one per input view
};

// Mean InfoNCE over all appearance vectors in the batch.
inline TclLossResult tcl_loss(const std::vector<LabeledView>& views,
                              const TrajectoryCenterBank& bank, double tau,
                              bool exclude_zero_centers = true) {
    if (views.empty()) throw std::invalid_argument("tcl_loss: no views");
    TclLossResult out;
    out.grad_views.reserve(views.size());
    const double inv_n = 1.0 / static_cast<double>(views.size());
    for (const auto& view : views) {
        auto r = info_nce(view.vector, bank, view.label, tau, exclude_zero_centers);
        out.loss += r.loss * inv_n;
        out.grad_views.push_back(r.grad_view * inv_n);
    }
    return out;
}

struct UncertaintyWeights {
    double eta1 = 0.0;
    double eta2 = 0.0;
};

struct TotalLossResult {
    double loss = 0.0;
    double d_eta1 = 0.0;
    double d_eta2 = 0.0;
    double d_l_det = 0.0;
    double d_l_tcl = 0.0;
};

// L = (exp(-eta1) L_det + exp(-eta2) L_tcl + eta1 + eta2) / 2, the
// learnable two-task balance, with all four partial derivatives.
inline TotalLossResult total_loss(double l_det, double l_tcl, const UncertaintyWeights& w) {
    if (!std::isfinite(l_det) || !std::isfinite(l_tcl))
        throw std::invalid_argument("total_loss: non-finite inputs");
    const double e1 = std::exp(-w.eta1);
    const double e2 = std::exp(-w.eta2);
    TotalLossResult out;
    out.loss = 0.5 * (e1 * l_det + e2 * l_tcl + w.eta1 + w.eta2);
    out.d_eta1 = 0.5 * (1.0 - e1 * l_det);
    out.d_eta2 = 0.5 * (1.0 - e2 * l_tcl);
    out.d_l_det = 0.5 * e1;
    out.d_l_tcl = 0.5 * e2;
    return out;
}

} // namespace motkit
