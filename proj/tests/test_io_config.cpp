#include "motkit/config.hpp"
#include "motkit/io.hpp"
#include "motkit/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace motkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("motkit_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

} // namespace

TEST_CASE("mot line round trips") {
    const std::string canonical = "1,2,100,200,50,150,1,-1,-1,-1";
    CHECK(write_mot_line(parse_mot_line(canonical, 1)) == canonical);

    const std::string fractional = "3,7,100.5,200.25,50.125,150,0.9,-1,-1,-1";
    CHECK(write_mot_line(parse_mot_line(fractional, 1)) == fractional);
}

TEST_CASE("mot line errors carry the line number") {
    CHECK_THROWS_WITH(parse_mot_line("1,2,100", 17),
                      Catch::Matchers::ContainsSubstring("17"));
    CHECK_THROWS_WITH(parse_mot_line("1,2,abc,0,0,0,1,-1,-1,-1", 4),
                      Catch::Matchers::ContainsSubstring("4"));
    CHECK_THROWS_AS(parse_mot_line("0,2,1,1,1,1,1,-1,-1,-1", 1), std::runtime_error);
}

TEST_CASE("mot file write/read round trip") {
    TempDir dir;
    Rng rng(5);
    std::vector<MotLine> lines;
    for (int i = 0; i < 50; ++i)
        lines.push_back({i / 5 + 1, i % 5 + 1, rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0),
                         rng.uniform(1.0, 30.0), rng.uniform(1.0, 30.0), rng.uniform(),
                         -1.0, -1.0, -1.0});
    const fs::path file = dir.path / "boxes.txt";
    write_mot_file(file, lines);
    const auto loaded = read_mot_file(file);
    REQUIRE(loaded.size() == lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        CHECK(loaded[i].frame == lines[i].frame);
        CHECK(loaded[i].left == lines[i].left);      // bit-exact
        CHECK(loaded[i].height == lines[i].height);
        CHECK(loaded[i].conf == lines[i].conf);
    }
}

TEST_CASE("embedding sidecar round trips bit-exactly") {
    TempDir dir;
    Rng rng(11);
    std::vector<std::vector<Detection>> frames(3);
    for (int f = 0; f < 3; ++f) {
        for (int d = 0; d < 2 + f; ++d) {
            Detection det;
            det.frame = f + 1;
            det.box = {1.0 * d, 2.0 * d, 5, 5};
            det.embedding = Eigen::VectorXd(4);
            for (int k = 0; k < 4; ++k) det.embedding(k) = rng.gauss();
            frames[static_cast<std::size_t>(f)].push_back(det);
        }
    }
    const fs::path file = dir.path / "emb.txt";
    write_embedding_sidecar(file, frames);
    const auto rows = read_embedding_sidecar(file);
    REQUIRE(rows.size() == 2 + 3 + 4);
    std::size_t cursor = 0;
    for (int f = 0; f < 3; ++f)
        for (std::size_t d = 0; d < frames[static_cast<std::size_t>(f)].size(); ++d, ++cursor) {
            CHECK(rows[cursor].frame == f + 1);
            CHECK(rows[cursor].det_index == static_cast<long>(d));
            CHECK(rows[cursor].embedding == frames[static_cast<std::size_t>(f)][d].embedding);
        }
}

TEST_CASE("join_detections validates the sidecar") {
    std::vector<MotLine> det_lines{{1, -1, 0, 0, 10, 10, 0.9, -1, -1, -1}};
    SECTION("missing embedding") {
        CHECK_THROWS_WITH(join_detections(det_lines, {}),
                          Catch::Matchers::ContainsSubstring("no sidecar embedding"));
    }
    SECTION("dangling det index") {
        std::vector<SidecarRow> rows{{1, 3, Eigen::VectorXd::Ones(2)}};
        CHECK_THROWS_AS(join_detections(det_lines, rows), std::runtime_error);
    }
    SECTION("happy path") {
        std::vector<SidecarRow> rows{{1, 0, Eigen::VectorXd::Ones(2)}};
        const auto frames = join_detections(det_lines, rows);
        REQUIRE(frames.size() == 1);
        REQUIRE(frames[0].size() == 1);
        CHECK(frames[0][0].embedding.size() == 2);
    }
}

TEST_CASE("checkpoint round trips the model bit-exactly") {
    TempDir dir;
    Rng rng(21);
    TrainConfig cfg;
    cfg.n_keypoints = 3;
    cfg.hidden1 = 6;
    cfg.hidden2 = 5;
    cfg.pre_dim = 4;
    cfg.out_dim = 4;
    cfg.loss = EmbedLoss::CrossEntropy;  // exercises the classifier tensors
    EmbedModel model = init_model(cfg, 7, 5, rng);
    for (Eigen::Index i = 0; i < model.offset.weight.size(); ++i)
        model.offset.weight.data()[i] = rng.gauss();
    model.weights.eta1 = rng.gauss();
    model.weights.eta2 = rng.gauss();

    const fs::path file = dir.path / "ck.txt";
    save_checkpoint(file, model, {{"strategy", "hard"}, {"note", "round trip"}});
    const Checkpoint loaded = load_checkpoint(file);

    CHECK(loaded.metadata.at("strategy") == "hard");
    CHECK(loaded.model.offset.weight == model.offset.weight);
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(loaded.model.proj.layers[l].w == model.proj.layers[l].w);
        CHECK(loaded.model.proj.layers[l].b == model.proj.layers[l].b);
    }
    CHECK(loaded.model.classifier_w == model.classifier_w);
    CHECK(loaded.model.weights.eta1 == model.weights.eta1);
    CHECK(loaded.model.weights.eta2 == model.weights.eta2);
}

TEST_CASE("feature map binary round trips") {
    TempDir dir;
    Rng rng(31);
    FeatureMap map(5, 7, 3);
    for (Eigen::Index i = 0; i < map.values.rows(); ++i)
        for (Eigen::Index c = 0; c < map.values.cols(); ++c)
            map.values(i, c) = rng.gauss();

    const fs::path file = dir.path / "frame.fmap";
    write_feature_map(file, map, 4.0, 12);
    const FeatureMapFile loaded = read_feature_map(file);
    CHECK(loaded.stride == 4.0);
    CHECK(loaded.frame == 12);
    CHECK(loaded.map.values == map.values);

    std::ofstream bad(dir.path / "bad.fmap", std::ios::binary);
    bad << "nope";
    bad.close();
    CHECK_THROWS_AS(read_feature_map(dir.path / "bad.fmap"), std::runtime_error);
}

TEST_CASE("loss csv has a header plus one row per record") {
    TempDir dir;
    std::vector<LossRecord> history{{0, 0, 1.5, 0.0, 0.75, 0.0, 0.0},
                                    {0, 1, 1.2, 0.0, 0.6, 0.01, -0.01}};
    const fs::path file = dir.path / "loss.csv";
    write_loss_csv(file, history);
    std::ifstream in(file);
    std::string line;
    int count = 0;
    while (std::getline(in, line)) ++count;
    CHECK(count == 3);
}

TEST_CASE("run config schema") {
    RunConfig cfg;
    SECTION("reference defaults") {
        CHECK(cfg.get_double("train.tau") == 0.05);
        CHECK(cfg.get_double("train.alpha") == 0.2);
        CHECK(cfg.get_int("train.n_keypoints") == 9);
        CHECK(cfg.get_double("train.lr") == 1e-4);
        CHECK(cfg.get_int("track.memory_q") == 30);
        CHECK(cfg.get_double("track.kappa1") == 0.3);
        CHECK(cfg.get_double("track.kappa2") == 0.5);
        CHECK(cfg.get_double("track.kappa3") == 0.7);
        CHECK(cfg.get_int("track.lambda") == 15);
    }
    SECTION("unknown keys rejected") {
        CHECK_THROWS_WITH(cfg.set("track.kappa9", "0.5"),
                          Catch::Matchers::ContainsSubstring("unknown config key"));
    }
    SECTION("bad values rejected") {
        CHECK_THROWS_AS(cfg.set("train.tau", "0"), std::invalid_argument);
        CHECK_THROWS_AS(cfg.set("train.tau", "nope"), std::invalid_argument);
        CHECK_THROWS_AS(cfg.set("train.strategy", "hardest"), std::invalid_argument);
        CHECK_THROWS_AS(cfg.set("track.beta_mode", "fixed:1.5"), std::invalid_argument);
    }
    SECTION("beta mode plumbs through") {
        cfg.set("track.beta_mode", "fixed:0.9");
        const TrackerConfig tc = cfg.tracker();
        CHECK_FALSE(tc.adaptive_beta);
        CHECK(tc.fixed_beta == 0.9);
    }
    SECTION("file loading with comments and whitespace") {
        TempDir dir;
        const fs::path file = dir.path / "run.cfg";
        {
            std::ofstream out(file);
            out << "# comment\n";
            out << "train.tau = 0.1\n";
            out << "  sim.identities=7  # trailing comment\n";
            out << "\n";
        }
        cfg.load_file(file);
        CHECK(cfg.get_double("train.tau") == 0.1);
        CHECK(cfg.get_int("sim.identities") == 7);
    }
    SECTION("line numbers in file errors") {
        TempDir dir;
        const fs::path file = dir.path / "bad.cfg";
        {
            std::ofstream out(file);
            out << "train.tau = 0.1\n";
            out << "nonsense\n";
        }
        CHECK_THROWS_WITH(cfg.load_file(file), Catch::Matchers::ContainsSubstring(":2"));
    }
    SECTION("serialize -> load reproduces the config") {
        cfg.set("train.strategy", "average");
        cfg.set("seed", "99");
        TempDir dir;
        const fs::path file = dir.path / "eff.cfg";
        {
            std::ofstream out(file);
            out << cfg.serialize();
        }
        RunConfig reloaded;
        reloaded.load_file(file);
        CHECK(reloaded.serialize() == cfg.serialize());
    }
    SECTION("typed sub-configs validate") {
        cfg.set("sim.box_min", "3");
        CHECK_THROWS_AS(cfg.scenario(), std::invalid_argument);  // stride 4 > box_min 3
    }
}
