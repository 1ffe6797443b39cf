#include "motkit/sim.hpp"
#include "motkit/trainer.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>

using namespace motkit;

namespace {

std::vector<TrainingFrame> to_training_frames(const Scenario& sc) {
    std::vector<TrainingFrame> frames;
    frames.reserve(sc.frames.size());
    for (std::size_t t = 0; t < sc.frames.size(); ++t) {
        TrainingFrame f;
        f.frame = sc.frames[t].frame;
        f.map = render_feature_map(sc, static_cast<int>(t));
        for (const auto& b : sc.frames[t].gt.boxes)
            f.instances.push_back({to_map_scale(b.box, sc.cfg.feature_stride),
                                   static_cast<int>(b.id - 1)});
        frames.push_back(std::move(f));
    }
    return frames;
}

ScenarioConfig small_scenario(std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.n_identities = 5;
    cfg.n_frames = 40;
    cfg.arena_width = 128;
    cfg.arena_height = 96;
    cfg.feature_channels = 8;
    cfg.embedding_dim = 16;
    cfg.background_noise = 0.02;
    cfg.seed = seed;
    return cfg;
}

TrainConfig small_train(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.01;  // visible progress in a handful of steps
    cfg.n_keypoints = 5;
    cfg.hidden1 = 24;
    cfg.hidden2 = 24;
    cfg.pre_dim = 12;
    cfg.out_dim = 12;
    cfg.seed = seed;
    return cfg;
}

double epoch_mean_loss(const std::vector<LossRecord>& history, int epoch) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : history)
        if (r.epoch == epoch) {
            sum += r.l_tcl;
            ++n;
        }
    REQUIRE(n > 0);
    return sum / n;
}

} // namespace

TEST_CASE("zero epochs leave the model at its initialization") {
    const Scenario sc = generate_scenario(small_scenario(1));
    const auto frames = to_training_frames(sc);
    TrainConfig cfg = small_train(11);
    cfg.epochs = 0;

    const TrainResult result = train(frames, cfg, sc.cfg.n_identities);
    Rng rng(cfg.seed);
    const EmbedModel fresh = init_model(cfg, sc.cfg.feature_channels, sc.cfg.n_identities, rng);

    CHECK(result.model.offset.weight == fresh.offset.weight);
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(result.model.proj.layers[l].w == fresh.proj.layers[l].w);
        CHECK(result.model.proj.layers[l].b == fresh.proj.layers[l].b);
    }
    CHECK(result.history.empty());
}

TEST_CASE("training is bit-deterministic given the seed") {
    const Scenario sc = generate_scenario(small_scenario(2));
    const auto frames = to_training_frames(sc);
    TrainConfig cfg = small_train(7);
    cfg.epochs = 2;

    const TrainResult a = train(frames, cfg, sc.cfg.n_identities);
    const TrainResult b = train(frames, cfg, sc.cfg.n_identities);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].l_tcl == b.history[i].l_tcl);
        CHECK(a.history[i].l_total == b.history[i].l_total);
        CHECK(a.history[i].eta1 == b.history[i].eta1);
        CHECK(a.history[i].eta2 == b.history[i].eta2);
    }
    CHECK(a.model.offset.weight == b.model.offset.weight);
    for (int l = 0; l < sc.cfg.n_identities; ++l) CHECK(a.bank.center(l) == b.bank.center(l));
}

TEST_CASE("the bank restarts from zero at every epoch") {
    const Scenario sc = generate_scenario(small_scenario(3));
    const auto frames = to_training_frames(sc);
    TrainConfig cfg = small_train(5);
    cfg.epochs = 3;

    const TrainResult result = train(frames, cfg, sc.cfg.n_identities);
    // Against an all-zero bank every view's loss is exactly zero (the
    // positive is the only denominator term), so the first iteration of
    // each epoch is the reset signature.
    std::map<int, double> first_iteration_loss;
    std::map<int, double> epoch_max;
    for (const auto& r : result.history) {
        if (r.iteration == 0) first_iteration_loss[r.epoch] = r.l_tcl;
        epoch_max[r.epoch] = std::max(epoch_max[r.epoch], r.l_tcl);
    }
    REQUIRE(first_iteration_loss.size() == 3);
    for (const auto& [epoch, loss] : first_iteration_loss) CHECK(loss == 0.0);
    for (const auto& [epoch, mx] : epoch_max) CHECK(mx > 0.0);
}

TEST_CASE("contrastive training reduces the loss on a separable dataset") {
    int successes = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ScenarioConfig sc_cfg = small_scenario(100 + seed);
        const Scenario sc = generate_scenario(sc_cfg);
        const auto frames = to_training_frames(sc);
        TrainConfig cfg = small_train(seed);
        const TrainResult result = train(frames, cfg, sc_cfg.n_identities);
        const double first = epoch_mean_loss(result.history, 0);
        const double last = epoch_mean_loss(result.history, cfg.epochs - 1);
        if (last < first) ++successes;
    }
    CHECK(successes >= 9);
}

TEST_CASE("cross-entropy baseline trains") {
    const Scenario sc = generate_scenario(small_scenario(4));
    const auto frames = to_training_frames(sc);
    TrainConfig cfg = small_train(13);
    cfg.loss = EmbedLoss::CrossEntropy;
    cfg.epochs = 2;

    const TrainResult result = train(frames, cfg, sc.cfg.n_identities);
    CHECK(result.model.classifier_w.rows() == sc.cfg.n_identities);
    REQUIRE_FALSE(result.history.empty());
    for (const auto& r : result.history) {
        CHECK(std::isfinite(r.l_tcl));
        CHECK(std::isfinite(r.l_total));
    }
    const double first = epoch_mean_loss(result.history, 0);
    const double last = epoch_mean_loss(result.history, 1);
    CHECK(last < first);  // identity classification is nearly trivial here
}

TEST_CASE("embed_dataset produces one unit embedding per instance") {
    const Scenario sc = generate_scenario(small_scenario(6));
    const auto frames = to_training_frames(sc);
    TrainConfig cfg = small_train(3);
    Rng rng(cfg.seed);
    const EmbedModel model = init_model(cfg, sc.cfg.feature_channels, sc.cfg.n_identities, rng);

    const auto embedded = embed_dataset(model, frames, cfg.offset_units);
    CHECK(embedded.size() == frames.size() * static_cast<std::size_t>(sc.cfg.n_identities));
    for (const auto& e : embedded) {
        CHECK(e.embedding.size() == cfg.out_dim * cfg.n_keypoints);
        CHECK(e.embedding.norm() == Catch::Approx(1.0).margin(1e-9));
    }
    const double ratio = separation_ratio(embedded);
    CHECK(ratio > 0.0);
    CHECK(std::isfinite(ratio));
}

TEST_CASE("train rejects labels without bank entries") {
    const Scenario sc = generate_scenario(small_scenario(8));
    auto frames = to_training_frames(sc);
    TrainConfig cfg = small_train(1);
    CHECK_THROWS_AS(train(frames, cfg, 2), std::invalid_argument);  // labels reach 4
}
