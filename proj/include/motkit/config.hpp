// Flat key=value run configuration with a fixed schema. Unknown keys are
// rejected; every value is validated on assignment. Defaults follow the
// reference hyper-parameters (tau 0.05, alpha 0.2, 9 keypoints, Q 30,
// kappas 0.3/0.5/0.7, lambda 15, Adam lr 1e-4).
#pragma once

#include "motkit/sim.hpp"
#include "motkit/tracker.hpp"
#include "motkit/trainer.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace motkit {

class RunConfig {
public:
    RunConfig() {
        for (const auto& e : schema()) values_[e.key] = e.default_value;
    }

    void set(const std::string& key, const std::string& value) {
        const SchemaEntry* entry = find(key);
        if (entry == nullptr)
            throw std::invalid_argument("unknown config key: " + key);
        entry->check(value);
        values_[key] = value;
    }

    // "key = value" lines; '#' starts a comment; blank lines ignored.
    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config " + path.string());
        std::string line;
        long n = 0;
        while (std::getline(in, line)) {
            ++n;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(path.string() + ":" + std::to_string(n) +
                                         ": expected key=value");
            try {
                set(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
            } catch (const std::exception& e) {
                throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " +
                                         e.what());
            }
        }
    }

    // "key=value" as passed on the command line.
    void set_pair(const std::string& pair) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + pair + "'");
        set(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
    }

    std::string get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw std::invalid_argument("unknown config key: " + key);
        return it->second;
    }
    double get_double(const std::string& key) const { return std::stod(get(key)); }
    long get_int(const std::string& key) const { return std::stol(get(key)); }
    bool get_bool(const std::string& key) const { return get(key) == "true"; }

    // Sorted key=value lines; rerunning with this text reproduces the run.
    std::string serialize() const {
        std::ostringstream out;
        for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
        return out.str();
    }

    std::uint64_t seed() const { return static_cast<std::uint64_t>(get_int("seed")); }

    ScenarioConfig scenario() const {
        ScenarioConfig c;
        c.n_identities = static_cast<int>(get_int("sim.identities"));
        c.n_frames = static_cast<int>(get_int("sim.frames"));
        c.arena_width = get_double("sim.arena_width");
        c.arena_height = get_double("sim.arena_height");
        c.waypoints = static_cast<int>(get_int("sim.waypoints"));
        c.speed_min = get_double("sim.speed_min");
        c.speed_max = get_double("sim.speed_max");
        c.box_min = get_double("sim.box_min");
        c.box_max = get_double("sim.box_max");
        c.p_drop = get_double("sim.p_drop");
        c.occlusion_drop_boost = get_double("sim.occlusion_drop_boost");
        c.sigma_box = get_double("sim.sigma_box");
        c.sigma_emb = get_double("sim.sigma_emb");
        c.occlusion = get_bool("sim.occlusion");
        c.embedding_dim = static_cast<int>(get_int("sim.embedding_dim"));
        c.feature_stride = get_double("sim.feature_stride");
        c.feature_channels = static_cast<int>(get_int("sim.feature_channels"));
        c.background_noise = get_double("sim.background_noise");
        c.latent_max_cos = get_double("sim.latent_max_cos");
        c.appearance_drift = get_double("sim.appearance_drift");
        c.seed = seed();
        c.validate();
        return c;
    }

    TrainConfig trainer() const {
        TrainConfig c;
        c.alpha = get_double("train.alpha");
        c.tau = get_double("train.tau");
        c.n_keypoints = static_cast<int>(get_int("train.n_keypoints"));
        c.learning_rate = get_double("train.lr");
        c.epochs = static_cast<int>(get_int("train.epochs"));
        c.batch_size = static_cast<int>(get_int("train.batch_size"));
        c.strategy = parse_update_strategy(get("train.strategy"));
        c.loss = parse_embed_loss(get("train.loss"));
        c.seed = seed();
        c.hidden1 = static_cast<int>(get_int("train.hidden1"));
        c.hidden2 = static_cast<int>(get_int("train.hidden2"));
        c.pre_dim = static_cast<int>(get_int("train.pre_dim"));
        c.out_dim = static_cast<int>(get_int("train.out_dim"));
        c.l_det_constant = get_double("train.l_det");
        c.normalize_centers = get_bool("train.normalize_centers");
        c.exclude_zero_centers = get_bool("train.exclude_zero_centers");
        c.offset_units = get("train.offset_units") == "box" ? OffsetUnits::BoxNormalized
                                                            : OffsetUnits::FeatureMapPixels;
        c.validate();
        return c;
    }

    TrackerConfig tracker() const {
        TrackerConfig c;
        c.kappa1 = get_double("track.kappa1");
        c.kappa2 = get_double("track.kappa2");
        c.kappa3 = get_double("track.kappa3");
        c.lambda = static_cast<int>(get_int("track.lambda"));
        c.memory_q = static_cast<int>(get_int("track.memory_q"));
        const std::string beta = get("track.beta_mode");
        if (beta == "adaptive") {
            c.adaptive_beta = true;
        } else {
            c.adaptive_beta = false;
            c.fixed_beta = std::stod(beta.substr(6));
        }
        c.gate = get_double("track.gate");
        c.validate();
        return c;
    }

private:
    struct SchemaEntry {
        std::string key;
        std::string default_value;
        std::function<void(const std::string&)> check;
    };

    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static void parse_number(const std::string& v, double lo, double hi) {
        std::size_t pos = 0;
        double x = 0.0;
        try {
            x = std::stod(v, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("expected a number, got '" + v + "'");
        }
        if (pos != v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
        if (x < lo || x > hi)
            throw std::invalid_argument("value " + v + " outside [" + std::to_string(lo) +
                                        ", " + std::to_string(hi) + "]");
    }

    static const std::vector<SchemaEntry>& schema() {
        static const double inf = std::numeric_limits<double>::infinity();
        auto num = [](double lo, double hi) {
            return [lo, hi](const std::string& v) { parse_number(v, lo, hi); };
        };
        auto choice = [](std::vector<std::string> allowed) {
            return [allowed](const std::string& v) {
                for (const auto& a : allowed)
                    if (v == a) return;
                std::string msg = "expected one of {";
                for (const auto& a : allowed) msg += a + ",";
                msg.back() = '}';
                throw std::invalid_argument(msg + ", got '" + v + "'");
            };
        };
        auto beta_mode = [](const std::string& v) {
            if (v == "adaptive") return;
            if (v.rfind("fixed:", 0) == 0) {
                parse_number(v.substr(6), 0.0, 1.0);
                return;
            }
            throw std::invalid_argument("beta mode must be 'adaptive' or 'fixed:<value>'");
        };
        static const std::vector<SchemaEntry> entries = {
            {"seed", "1", num(0, 9e18)},
            {"sim.identities", "20", num(1, 10000)},
            {"sim.frames", "200", num(1, 1000000)},
            {"sim.arena_width", "256", num(8, 1e6)},
            {"sim.arena_height", "192", num(8, 1e6)},
            {"sim.waypoints", "6", num(1, 1000)},
            {"sim.speed_min", "0.5", num(0, 1e3)},
            {"sim.speed_max", "2.5", num(0, 1e3)},
            {"sim.box_min", "12", num(2, 1e5)},
            {"sim.box_max", "28", num(2, 1e5)},
            {"sim.p_drop", "0.05", num(0, 1)},
            {"sim.occlusion_drop_boost", "0.5", num(0, 1)},
            {"sim.sigma_box", "0.5", num(0, 1e3)},
            {"sim.sigma_emb", "0.1", num(0, 1e3)},
            {"sim.occlusion", "true", choice({"true", "false"})},
            {"sim.embedding_dim", "32", num(1, 4096)},
            {"sim.feature_stride", "4", num(0.25, 256)},
            {"sim.feature_channels", "16", num(1, 4096)},
            {"sim.background_noise", "0.05", num(0, 1e3)},
            {"sim.latent_max_cos", "0.5", num(0.01, 0.99)},
            {"sim.appearance_drift", "0", num(0, 1)},
            {"train.epochs", "5", num(0, 100000)},
            {"train.batch_size", "8", num(1, 100000)},
            {"train.lr", "0.0001", num(0, 10)},
            {"train.tau", "0.05", num(1e-6, 1)},
            {"train.alpha", "0.2", num(0, 1)},
            {"train.n_keypoints", "9", num(1, 256)},
            {"train.strategy", "hard", choice({"hard", "easy", "random", "average"})},
            {"train.loss", "tcl", choice({"tcl", "ce"})},
            {"train.hidden1", "64", num(1, 65536)},
            {"train.hidden2", "64", num(1, 65536)},
            {"train.pre_dim", "32", num(1, 65536)},
            {"train.out_dim", "32", num(1, 65536)},
            {"train.l_det", "0", num(0, 1e9)},
            {"train.normalize_centers", "true", choice({"true", "false"})},
            {"train.exclude_zero_centers", "true", choice({"true", "false"})},
            {"train.offset_units", "pixels", choice({"pixels", "box"})},
            {"track.kappa1", "0.3", num(0, 1)},
            {"track.kappa2", "0.5", num(0, 1)},
            {"track.kappa3", "0.7", num(0, 1)},
            {"track.lambda", "15", num(1, 100000)},
            {"track.memory_q", "30", num(1, 100000)},
            {"track.beta_mode", "adaptive", beta_mode},
            {"track.gate", "9.4877", num(1e-6, inf)},
        };
        return entries;
    }

    static const SchemaEntry* find(const std::string& key) {
        for (const auto& e : schema())
            if (e.key == key) return &e;
        return nullptr;
    }

    std::map<std::string, std::string> values_;
};

} // namespace motkit
