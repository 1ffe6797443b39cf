// Trajectory-contrastive training loop.
//
// Per epoch the center bank restarts from zero; per batch (consecutive
// frames of one sequence, chunk order shuffled) the loop runs
// forward_views on every labeled instance, normalizes each view, takes
// the mean InfoNCE against the bank, combines with the detection-loss
// stub through the uncertainty weighting, steps Adam, and only then
// updates the bank with the strategy-selected sample per trajectory.
// A cross-entropy identity classifier is available as the comparison
// baseline for the embedding-head loss.
#pragma once

#include "motkit/adam.hpp"
#include "motkit/bank.hpp"
#include "motkit/embed.hpp"
#include "motkit/losses.hpp"
#include "motkit/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace motkit {

enum class EmbedLoss { Tcl, CrossEntropy };

inline EmbedLoss parse_embed_loss(const std::string& s) {
    if (s == "tcl") return EmbedLoss::Tcl;
    if (s == "ce") return EmbedLoss::CrossEntropy;
    throw std::invalid_argument("unknown embedding loss: " + s);
}

struct TrainConfig {
    double alpha = 0.2;          // center momentum
    double tau = 0.05;           // InfoNCE temperature
    int n_keypoints = 9;
    double learning_rate = 1e-4;
    int epochs = 5;
    int batch_size = 8;          // frames per iteration
    UpdateStrategy strategy = UpdateStrategy::Hard;
    EmbedLoss loss = EmbedLoss::Tcl;
    std::uint64_t seed = 1;

    int hidden1 = 64;
    int hidden2 = 64;
    int pre_dim = 32;            // output of the normalized 3rd layer
    int out_dim = 32;            // appearance vector dimension

    double l_det_constant = 0.0; // pluggable detection-loss stub value
    bool normalize_centers = true;
    bool exclude_zero_centers = true;
    OffsetUnits offset_units = OffsetUnits::FeatureMapPixels;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha outside [0,1]");
        if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau outside (0,1]");
        if (n_keypoints < 1) throw std::invalid_argument("n_keypoints must be >= 1");
        if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (hidden1 < 1 || hidden2 < 1 || pre_dim < 1 || out_dim < 1)
            throw std::invalid_argument("projection dims must be >= 1");
    }
};

struct TrainingInstance {
    BoundingBox box;  // on feature-map scale
    int label = 0;    // dense trajectory index, 0-based
};

struct TrainingFrame {
    long frame = 0;
    FeatureMap map;
    std::vector<TrainingInstance> instances;
};

struct EmbedModel {
    OffsetHead offset;
    ProjectionHead proj;
    UncertaintyWeights weights;
    // Identity classifier, used only by the cross-entropy baseline.
    Eigen::MatrixXd classifier_w;
    Eigen::VectorXd classifier_b;

    int n_keypoints() const { return offset.n_keypoints(); }
};

inline EmbedModel init_model(const TrainConfig& cfg, int channels, int n_labels, Rng& rng) {
    EmbedModel m;
    m.offset = make_offset_head(cfg.n_keypoints, channels);
    m.proj = make_projection_head(channels, cfg.hidden1, cfg.hidden2, cfg.pre_dim, cfg.out_dim,
                                  [&rng] { return rng.uniform(); });
    if (cfg.loss == EmbedLoss::CrossEntropy) {
        const double s = std::sqrt(6.0 / (n_labels + cfg.out_dim));
        m.classifier_w = Eigen::MatrixXd::Zero(n_labels, cfg.out_dim);
        for (Eigen::Index i = 0; i < m.classifier_w.rows(); ++i)
            for (Eigen::Index j = 0; j < m.classifier_w.cols(); ++j)
                m.classifier_w(i, j) = s * (2.0 * rng.uniform() - 1.0);
        m.classifier_b = Eigen::VectorXd::Zero(n_labels);
    }
    return m;
}

struct LossRecord {
    int epoch = 0;
    int iteration = 0;
    double l_tcl = 0.0;   // embedding-head loss (InfoNCE or CE baseline)
    double l_det = 0.0;
    double l_total = 0.0;
    double eta1 = 0.0;
    double eta2 = 0.0;
};

struct TrainResult {
    EmbedModel model;
    std::vector<LossRecord> history;
    TrajectoryCenterBank bank;  // state at the end of the final epoch
};

namespace detail {

inline std::vector<ParamBlock> param_blocks(EmbedModel& m, EmbedGradients& g,
                                            double* d_eta1, double* d_eta2,
                                            Eigen::MatrixXd* cls_gw, Eigen::VectorXd* cls_gb) {
    std::vector<ParamBlock> blocks;
    blocks.push_back({"offset.w", m.offset.weight.data(), g.offset_weight.data(),
                      static_cast<std::size_t>(m.offset.weight.size())});
    for (std::size_t l = 0; l < 4; ++l) {
        blocks.push_back({"proj" + std::to_string(l + 1) + ".w", m.proj.layers[l].w.data(),
                          g.proj[l].w.data(), static_cast<std::size_t>(m.proj.layers[l].w.size())});
        blocks.push_back({"proj" + std::to_string(l + 1) + ".b", m.proj.layers[l].b.data(),
                          g.proj[l].b.data(), static_cast<std::size_t>(m.proj.layers[l].b.size())});
    }
    blocks.push_back({"eta1", &m.weights.eta1, d_eta1, 1});
    blocks.push_back({"eta2", &m.weights.eta2, d_eta2, 1});
    if (cls_gw != nullptr) {
        blocks.push_back({"cls.w", m.classifier_w.data(), cls_gw->data(),
                          static_cast<std::size_t>(m.classifier_w.size())});
        blocks.push_back({"cls.b", m.classifier_b.data(), cls_gb->data(),
                          static_cast<std::size_t>(m.classifier_b.size())});
    }
    return blocks;
}

// Gradient of the per-view L2 normalization p = out / |out|.
inline Eigen::VectorXd normalize_backward(const Eigen::VectorXd& p, double raw_norm,
                                          bool degenerate, const Eigen::VectorXd& g_p) {
    if (degenerate) return Eigen::VectorXd::Zero(p.size());
    return (g_p - g_p.dot(p) * p) / raw_norm;
}

} // namespace detail

// One batch forward: tapes plus normalized per-view appearance vectors.
struct BatchViews {
    std::vector<ViewTape> tapes;                // one per instance
    std::vector<LabeledView> views;             // flattened, normalized
    std::vector<double> raw_norms;              // per view, for backward
    std::vector<bool> degenerate;               // per view
};

inline BatchViews forward_batch(const EmbedModel& model,
                                const std::vector<const TrainingFrame*>& frames,
                                OffsetUnits units) {
    BatchViews out;
    for (const TrainingFrame* frame : frames) {
        for (const auto& inst : frame->instances) {
            ViewTape tape = forward_views(frame->map, inst.box, model.offset, model.proj,
                                          {units});
            for (const auto& view : tape.views) {
                auto n = l2_normalize(view.proj.output);
                out.views.push_back({n.value, inst.label});
                out.raw_norms.push_back(view.proj.output.norm());
                out.degenerate.push_back(n.degenerate);
            }
            out.tapes.push_back(std::move(tape));
        }
    }
    return out;
}

// Softmax cross-entropy over trajectory identities (comparison baseline).
struct CeLossResult {
    double loss = 0.0;
    std::vector<Eigen::VectorXd> grad_views;
    Eigen::MatrixXd grad_w;
    Eigen::VectorXd grad_b;
};

inline CeLossResult ce_loss(const std::vector<LabeledView>& views, const Eigen::MatrixXd& w,
                            const Eigen::VectorXd& b) {
    if (views.empty()) throw std::invalid_argument("ce_loss: no views");
    CeLossResult out;
    out.grad_w = Eigen::MatrixXd::Zero(w.rows(), w.cols());
    out.grad_b = Eigen::VectorXd::Zero(b.size());
    const double inv_n = 1.0 / static_cast<double>(views.size());
    for (const auto& view : views) {
        const Eigen::VectorXd logits = w * view.vector + b;
        const double shift = logits.maxCoeff();
        const Eigen::VectorXd expv = (logits.array() - shift).exp();
        const double denom = expv.sum();
        out.loss += (shift + std::log(denom) - logits(view.label)) * inv_n;
        Eigen::VectorXd d_logits = (expv / denom) * inv_n;
        d_logits(view.label) -= inv_n;
        out.grad_w += d_logits * view.vector.transpose();
        out.grad_b += d_logits;
        out.grad_views.push_back(w.transpose() * d_logits);
    }
    return out;
}

inline TrainResult train(const std::vector<TrainingFrame>& frames, const TrainConfig& cfg,
                         int n_labels) {
    cfg.validate();
    if (frames.empty()) throw std::invalid_argument("train: empty dataset");
    if (n_labels < 1) throw std::invalid_argument("train: need at least one trajectory");
    for (const auto& f : frames)
        for (const auto& inst : f.instances)
            if (inst.label < 0 || inst.label >= n_labels)
                throw std::invalid_argument("train: instance label without bank entry");

    Rng rng(cfg.seed);
    const int channels = frames.front().map.channels;

    TrainResult result;
    result.model = init_model(cfg, channels, n_labels, rng);
    result.bank = init_bank(n_labels, cfg.out_dim, cfg.normalize_centers);

    AdamOptimizer adam(cfg.learning_rate);
    EmbedGradients grads = EmbedGradients::zeros_like(result.model.offset, result.model.proj);
    Eigen::MatrixXd cls_gw;
    Eigen::VectorXd cls_gb;
    const bool use_ce = cfg.loss == EmbedLoss::CrossEntropy;
    if (use_ce) {
        cls_gw = Eigen::MatrixXd::Zero(n_labels, cfg.out_dim);
        cls_gb = Eigen::VectorXd::Zero(n_labels);
    }

    // Consecutive-frame chunks; chunk order reshuffled every epoch.
    const int n_frames = static_cast<int>(frames.size());
    const int n_chunks = (n_frames + cfg.batch_size - 1) / cfg.batch_size;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        result.bank = init_bank(n_labels, cfg.out_dim, cfg.normalize_centers);

        std::vector<int> order(static_cast<std::size_t>(n_chunks));
        for (int i = 0; i < n_chunks; ++i) order[static_cast<std::size_t>(i)] = i;
        for (int i = n_chunks - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.uniform_index(
                          static_cast<std::uint64_t>(i) + 1))]);

        for (int it = 0; it < n_chunks; ++it) {
            const int chunk = order[static_cast<std::size_t>(it)];
            std::vector<const TrainingFrame*> batch;
            for (int f = chunk * cfg.batch_size;
                 f < std::min(n_frames, (chunk + 1) * cfg.batch_size); ++f)
                batch.push_back(&frames[static_cast<std::size_t>(f)]);

            BatchViews bv = forward_batch(result.model, batch, cfg.offset_units);
            if (bv.views.empty()) {  // batch of empty frames: nothing to learn from
                result.history.push_back({epoch, it, 0.0, cfg.l_det_constant, 0.0,
                                          result.model.weights.eta1, result.model.weights.eta2});
                continue;
            }

            double head_loss = 0.0;
            std::vector<Eigen::VectorXd> grad_views;
            if (use_ce) {
                CeLossResult ce = ce_loss(bv.views, result.model.classifier_w,
                                          result.model.classifier_b);
                head_loss = ce.loss;
                grad_views = std::move(ce.grad_views);
                cls_gw = ce.grad_w;
                cls_gb = ce.grad_b;
            } else {
                TclLossResult tcl =
                    tcl_loss(bv.views, result.bank, cfg.tau, cfg.exclude_zero_centers);
                head_loss = tcl.loss;
                grad_views = std::move(tcl.grad_views);
            }

            const TotalLossResult total =
                total_loss(cfg.l_det_constant, head_loss, result.model.weights);

            // Backward through per-view normalization into the tapes.
            grads.set_zero();
            std::size_t view_cursor = 0;
            for (auto& tape : bv.tapes) {
                std::vector<Eigen::VectorXd> upstream;
                upstream.reserve(tape.views.size());
                for (std::size_t k = 0; k < tape.views.size(); ++k, ++view_cursor) {
                    const Eigen::VectorXd g_p = total.d_l_tcl * grad_views[view_cursor];
                    upstream.push_back(detail::normalize_backward(
                        bv.views[view_cursor].vector, bv.raw_norms[view_cursor],
                        bv.degenerate[view_cursor], g_p));
                }
                backward_views(tape, upstream, result.model.proj, grads);
            }
            if (use_ce) {
                cls_gw *= total.d_l_tcl;
                cls_gb *= total.d_l_tcl;
            }
            double d_eta1 = total.d_eta1;
            double d_eta2 = total.d_eta2;

            const double eta1_logged = result.model.weights.eta1;
            const double eta2_logged = result.model.weights.eta2;
            adam.step(detail::param_blocks(result.model, grads, &d_eta1, &d_eta2,
                                           use_ce ? &cls_gw : nullptr,
                                           use_ce ? &cls_gb : nullptr));

            // Bank update strictly after the optimizer step.
            if (!use_ce) {
                std::map<int, std::vector<Embedding>> per_label;
                for (const auto& view : bv.views)
                    per_label[view.label].push_back(view.vector);
                for (const auto& [label, candidates] : per_label) {
                    const Embedding pick = select_update_sample(
                        candidates, result.bank.center(label), cfg.strategy, rng);
                    result.bank.update_center(label, pick, cfg.alpha);
                }
            }

            result.history.push_back({epoch, it, head_loss, cfg.l_det_constant, total.loss,
                                      eta1_logged, eta2_logged});
        }
    }
    return result;
}

// Per-instance inference embedding over a dataset: normalized
// concatenation of one instance's views.
struct InstanceEmbedding {
    long frame = 0;
    int label = 0;
    Embedding embedding;
};

inline std::vector<InstanceEmbedding> embed_dataset(const EmbedModel& model,
                                                    const std::vector<TrainingFrame>& frames,
                                                    OffsetUnits units) {
    std::vector<InstanceEmbedding> out;
    for (const auto& frame : frames) {
        for (const auto& inst : frame.instances) {
            ViewTape tape = forward_views(frame.map, inst.box, model.offset, model.proj,
                                          {units});
            out.push_back({frame.frame, inst.label, concat_views(tape.outputs())});
        }
    }
    return out;
}

// Mean intra-identity cosine distance over mean inter-identity cosine
// distance; lower means better separated identities.
inline double separation_ratio(const std::vector<InstanceEmbedding>& embeddings) {
    double intra = 0.0, inter = 0.0;
    long n_intra = 0, n_inter = 0;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
            const double d =
                1.0 - cosine_similarity(embeddings[i].embedding, embeddings[j].embedding);
            if (embeddings[i].label == embeddings[j].label) {
                intra += d;
                ++n_intra;
            } else {
                inter += d;
                ++n_inter;
            }
        }
    }
    if (n_intra == 0 || n_inter == 0 || inter <= 0.0) return 1.0;
    return (intra / static_cast<double>(n_intra)) / (inter / static_cast<double>(n_inter));
}

} // namespace motkit
