// Finite-difference verification of every analytic gradient in the
// training path: offset head, all four projection layers (through
// bilinear sampling, clamping and per-view normalization) against the
// contrastive loss, plus the four partials of the uncertainty-weighted
// total loss. Central differences, 64-bit, step 1e-5.
#pragma once

#include "motkit/bank.hpp"
#include "motkit/embed.hpp"
#include "motkit/losses.hpp"
#include "motkit/rng.hpp"
#include "motkit/trainer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace motkit {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;  // max over all trials
    double tolerance = 1e-4;
    int trials = 0;
    int failures = 0;  // parameters whose max error exceeded tolerance

    bool passed() const { return failures == 0; }
};

namespace detail {

// |a - f| relative to max(|a|, |f|) with a floor that turns the 1e-7
// absolute band into the same 1e-4 scale.
inline double rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) / denom;
}

struct GradCheckProblem {
    FeatureMap map;
    std::vector<TrainingInstance> instances;
    TrajectoryCenterBank bank{1, 1};
    OffsetHead offset;
    ProjectionHead proj;
    UncertaintyWeights weights;
    double tau = 0.05;
    double l_det = 0.0;

    double head_loss() const {
        std::vector<LabeledView> views;
        for (const auto& inst : instances) {
            ViewTape tape = forward_views(map, inst.box, offset, proj);
            for (const auto& view : tape.views)
                views.push_back({l2_normalize(view.proj.output).value, inst.label});
        }
        return tcl_loss(views, bank, tau).loss;
    }

    EmbedGradients analytic_grads() const {
        EmbedGradients grads = EmbedGradients::zeros_like(offset, proj);
        std::vector<ViewTape> tapes;
        std::vector<LabeledView> views;
        std::vector<double> raw_norms;
        std::vector<bool> degenerate;
        for (const auto& inst : instances) {
            ViewTape tape = forward_views(map, inst.box, offset, proj);
            for (const auto& view : tape.views) {
                auto n = l2_normalize(view.proj.output);
                views.push_back({n.value, inst.label});
                raw_norms.push_back(view.proj.output.norm());
                degenerate.push_back(n.degenerate);
            }
            tapes.push_back(std::move(tape));
        }
        const TclLossResult tcl = tcl_loss(views, bank, tau);
        std::size_t cursor = 0;
        for (auto& tape : tapes) {
            std::vector<Eigen::VectorXd> upstream;
            for (std::size_t k = 0; k < tape.views.size(); ++k, ++cursor)
                upstream.push_back(trainer_normalize_backward(
                    views[cursor].vector, raw_norms[cursor], degenerate[cursor],
                    tcl.grad_views[cursor]));
            backward_views(tape, upstream, proj, grads);
        }
        return grads;
    }

private:
    static Eigen::VectorXd trainer_normalize_backward(const Eigen::VectorXd& p, double raw,
                                                      bool degen, const Eigen::VectorXd& g) {
        return motkit::detail::normalize_backward(p, raw, degen, g);
    }
};

inline GradCheckProblem random_problem(Rng& rng) {
    GradCheckProblem p;
    const int channels = 3 + static_cast<int>(rng.uniform_index(5));   // 3..7
    const int n_keypoints = 1 + static_cast<int>(rng.uniform_index(4));  // 1..4
    const int h1 = 4 + static_cast<int>(rng.uniform_index(9));
    const int h2 = 4 + static_cast<int>(rng.uniform_index(9));
    const int pre = 3 + static_cast<int>(rng.uniform_index(6));
    const int out = 3 + static_cast<int>(rng.uniform_index(6));
    const int width = 7 + static_cast<int>(rng.uniform_index(5));
    const int height = 7 + static_cast<int>(rng.uniform_index(5));

    p.map = FeatureMap(height, width, channels);
    for (Eigen::Index i = 0; i < p.map.values.rows(); ++i)
        for (Eigen::Index c = 0; c < p.map.values.cols(); ++c)
            p.map.values(i, c) = rng.uniform(-1.0, 1.0);

    const int n_labels = 2 + static_cast<int>(rng.uniform_index(3));
    const int n_instances = 1 + static_cast<int>(rng.uniform_index(3));
    for (int i = 0; i < n_instances; ++i) {
        TrainingInstance inst;
        const double w = rng.uniform(2.5, 4.5);
        const double h = rng.uniform(2.5, 4.5);
        inst.box = {rng.uniform(1.0, width - 1.0 - w), rng.uniform(1.0, height - 1.0 - h), w, h};
        inst.label = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_labels)));
        p.instances.push_back(inst);
    }

    p.bank = TrajectoryCenterBank(n_labels, out);
    for (int l = 0; l < n_labels; ++l) {
        Eigen::VectorXd c(out);
        for (int d = 0; d < out; ++d) c(d) = rng.gauss();
        p.bank.update_center(l, l2_normalize(c).value, 0.0);
    }

    // Nonzero offset weights keep the keypoints away from exact grid
    // nodes, where the bilinear derivative is not defined.
    p.offset = make_offset_head(n_keypoints, channels);
    for (Eigen::Index i = 0; i < p.offset.weight.rows(); ++i)
        for (Eigen::Index j = 0; j < p.offset.weight.cols(); ++j)
            p.offset.weight(i, j) = rng.uniform(-0.35, 0.35);
    p.proj = make_projection_head(channels, h1, h2, pre, out, [&rng] { return rng.uniform(); });
    // Nonzero biases keep every layer away from the all-dead rectifier
    // region, whose exact zeros would park the layer-3 normalization on
    // its discontinuity and break finite differences.
    for (auto& layer : p.proj.layers)
        for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b(i) = rng.uniform(0.05, 0.25);
    p.weights.eta1 = rng.uniform(-0.5, 0.5);
    p.weights.eta2 = rng.uniform(-0.5, 0.5);
    p.tau = rng.uniform(0.2, 1.0);
    p.l_det = rng.uniform(0.0, 2.0);
    return p;
}

} // namespace detail

// `corrupt_gradient` is a harness-sanity hook: it perturbs one analytic
// gradient entry so the report must fail.
inline GradCheckReport run_grad_checks(int trials, std::uint64_t seed, double tolerance = 1e-4,
                                       bool corrupt_gradient = false) {
    GradCheckReport report;
    report.tolerance = tolerance;
    report.trials = trials;

    std::map<std::string, double> worst;
    const double step = 1e-5;
    Rng root(seed);

    for (int trial = 0; trial < trials; ++trial) {
        Rng rng = root.fork(static_cast<std::uint64_t>(trial));
        detail::GradCheckProblem p = detail::random_problem(rng);

        EmbedGradients analytic = p.analytic_grads();
        if (corrupt_gradient && trial == 0) analytic.offset_weight(0, 0) += 1e-3;

        struct Block {
            std::string name;
            double* value;
            const double* grad;
            Eigen::Index size;
        };
        std::vector<Block> blocks;
        blocks.push_back({"offset.w", p.offset.weight.data(), analytic.offset_weight.data(),
                          p.offset.weight.size()});
        for (std::size_t l = 0; l < 4; ++l) {
            blocks.push_back({"proj" + std::to_string(l + 1) + ".w", p.proj.layers[l].w.data(),
                              analytic.proj[l].w.data(), p.proj.layers[l].w.size()});
            blocks.push_back({"proj" + std::to_string(l + 1) + ".b", p.proj.layers[l].b.data(),
                              analytic.proj[l].b.data(), p.proj.layers[l].b.size()});
        }

        for (const auto& block : blocks) {
            double& slot = worst[block.name];
            for (Eigen::Index i = 0; i < block.size; ++i) {
                const double saved = block.value[i];
                block.value[i] = saved + step;
                const double up = p.head_loss();
                block.value[i] = saved - step;
                const double down = p.head_loss();
                block.value[i] = saved;
                const double numeric = (up - down) / (2.0 * step);
                slot = std::max(slot, detail::rel_error(block.grad[i], numeric));
            }
        }

        // Partials of the total loss (eta1, eta2 and both loss inputs).
        const double l_tcl = p.head_loss();
        const TotalLossResult total = total_loss(p.l_det, l_tcl, p.weights);
        auto fd = [&](auto&& eval) {
            return (eval(step) - eval(-step)) / (2.0 * step);
        };
        worst["total.eta1"] = std::max(
            worst["total.eta1"],
            detail::rel_error(total.d_eta1, fd([&](double h) {
                                  UncertaintyWeights w{p.weights.eta1 + h, p.weights.eta2};
                                  return total_loss(p.l_det, l_tcl, w).loss;
                              })));
        worst["total.eta2"] = std::max(
            worst["total.eta2"],
            detail::rel_error(total.d_eta2, fd([&](double h) {
                                  UncertaintyWeights w{p.weights.eta1, p.weights.eta2 + h};
                                  return total_loss(p.l_det, l_tcl, w).loss;
                              })));
        worst["total.l_det"] = std::max(
            worst["total.l_det"],
            detail::rel_error(total.d_l_det, fd([&](double h) {
                                  return total_loss(p.l_det + h, l_tcl, p.weights).loss;
                              })));
        worst["total.l_tcl"] = std::max(
            worst["total.l_tcl"],
            detail::rel_error(total.d_l_tcl, fd([&](double h) {
                                  return total_loss(p.l_det, l_tcl + h, p.weights).loss;
                              })));
    }

    for (const auto& [name, err] : worst) {
        report.per_param.push_back({name, err});
        if (err > tolerance) ++report.failures;
    }
    return report;
}

} // namespace motkit
