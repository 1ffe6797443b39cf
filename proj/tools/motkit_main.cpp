// motkit command-line tool: simulate / train / track / evaluate /
// gradcheck / bench. Every command is deterministic given config + seed;
// output directories receive the effective configuration alongside the
// data files. Exit codes: 0 success, 1 usage or I/O error,
// 2 verification failure.
#include "motkit/motkit.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<long> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_out) {
    cmd->add_option("--config", opts.config_file, "key=value config file");
    cmd->add_option("--set", opts.sets, "override a config key (key=value, repeatable)");
    cmd->add_option("--seed", opts.seed, "override the seed config key");
    if (with_out)
        cmd->add_option("--out", opts.out_dir,
                        "output directory (or set MOTKIT_OUT in the environment)");
}

motkit::RunConfig build_config(const CommonOpts& opts) {
    motkit::RunConfig cfg;
    if (!opts.config_file.empty()) cfg.load_file(opts.config_file);
    for (const auto& pair : opts.sets) cfg.set_pair(pair);
    if (opts.seed) cfg.set("seed", std::to_string(*opts.seed));
    return cfg;
}

fs::path resolve_out_dir(const CommonOpts& opts) {
    std::string dir = opts.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("MOTKIT_OUT");
        if (env != nullptr) dir = env;
    }
    if (dir.empty())
        throw std::runtime_error("no output directory: pass --out or set MOTKIT_OUT");
    fs::create_directories(dir);
    return dir;
}

void emit_effective_config(const motkit::RunConfig& cfg, const fs::path& out_dir) {
    const std::string text = cfg.serialize();
    std::cout << "effective config:\n" << text;
    std::ofstream file(out_dir / "effective_config.txt");
    if (!file) throw std::runtime_error("cannot write effective_config.txt");
    file << text;
}

std::string frame_file_name(long frame) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06ld.fmap", frame);
    return buf;
}

// ------------------------------------------------------------- simulate

int cmd_simulate(const CommonOpts& opts, bool features, bool noiseless) {
    motkit::RunConfig cfg = build_config(opts);
    if (noiseless) {
        cfg.set("sim.p_drop", "0");
        cfg.set("sim.sigma_box", "0");
        cfg.set("sim.sigma_emb", "0");
        cfg.set("sim.occlusion", "false");
    }
    const fs::path out = resolve_out_dir(opts);
    emit_effective_config(cfg, out);

    const motkit::Scenario sc = motkit::generate_scenario(cfg.scenario());

    std::vector<motkit::MotLine> gt_lines, det_lines;
    std::vector<std::vector<motkit::Detection>> det_frames;
    long detections = 0;
    for (const auto& frame : sc.frames) {
        for (const auto& b : frame.gt.boxes)
            gt_lines.push_back({frame.frame, b.id, b.box.left, b.box.top, b.box.width,
                                b.box.height, 1.0, -1.0, -1.0, -1.0});
        det_frames.emplace_back(frame.detections);
        for (const auto& det : frame.detections) {
            det_lines.push_back({frame.frame, -1, det.box.left, det.box.top, det.box.width,
                                 det.box.height, det.confidence, -1.0, -1.0, -1.0});
            ++detections;
        }
    }
    motkit::write_mot_file(out / "gt.txt", gt_lines);
    motkit::write_mot_file(out / "det.txt", det_lines);
    motkit::write_embedding_sidecar(out / "emb.txt", det_frames);

    if (features) {
        fs::create_directories(out / "frames");
        for (std::size_t t = 0; t < sc.frames.size(); ++t) {
            const motkit::FeatureMap map = motkit::render_feature_map(sc, static_cast<int>(t));
            motkit::write_feature_map(out / "frames" / frame_file_name(sc.frames[t].frame),
                                      map, sc.cfg.feature_stride, sc.frames[t].frame);
        }
    }

    const long total_slots =
        static_cast<long>(sc.frames.size()) * sc.cfg.n_identities;
    std::cout << "scenario: " << sc.cfg.n_identities << " identities, " << sc.frames.size()
              << " frames\n"
              << "detections: " << detections << " (dropped " << (total_slots - detections)
              << " of " << total_slots << ")\n"
              << "wrote gt.txt det.txt emb.txt" << (features ? " frames/*.fmap" : "") << "\n";
    return 0;
}

// ---------------------------------------------------------------- train

struct LoadedScenario {
    std::vector<motkit::TrainingFrame> frames;
    std::vector<long> label_to_id;  // dense label -> gt identity
    double stride = 1.0;
    int channels = 0;
};

LoadedScenario load_training_scenario(const fs::path& dir) {
    const auto gt_lines = motkit::read_mot_file(dir / "gt.txt");
    const auto gt_frames = motkit::group_by_frame(gt_lines);
    if (gt_frames.empty()) throw std::runtime_error("scenario has no ground truth");

    std::map<long, int> id_to_label;
    for (const auto& f : gt_frames)
        for (const auto& b : f.boxes) id_to_label.emplace(b.id, 0);
    LoadedScenario out;
    for (auto& [id, label] : id_to_label) {
        label = static_cast<int>(out.label_to_id.size());
        out.label_to_id.push_back(id);
    }

    for (const auto& f : gt_frames) {
        const fs::path fmap_path = dir / "frames" / frame_file_name(f.frame);
        if (!fs::exists(fmap_path))
            throw std::runtime_error("missing feature map " + fmap_path.string() +
                                     " (run simulate with --features)");
        motkit::FeatureMapFile fmap = motkit::read_feature_map(fmap_path);
        motkit::TrainingFrame frame;
        frame.frame = f.frame;
        frame.map = std::move(fmap.map);
        out.stride = fmap.stride;
        out.channels = frame.map.channels;
        for (const auto& b : f.boxes)
            frame.instances.push_back(
                {motkit::to_map_scale(b.box, fmap.stride), id_to_label.at(b.id)});
        out.frames.push_back(std::move(frame));
    }
    return out;
}

int cmd_train(const CommonOpts& opts, const std::string& scenario_dir) {
    motkit::RunConfig cfg = build_config(opts);
    const fs::path out = resolve_out_dir(opts);
    emit_effective_config(cfg, out);

    LoadedScenario sc = load_training_scenario(scenario_dir);
    const motkit::TrainConfig train_cfg = cfg.trainer();

    motkit::TrainResult result =
        motkit::train(sc.frames, train_cfg, static_cast<int>(sc.label_to_id.size()));

    std::map<std::string, std::string> meta = {
        {"strategy", motkit::to_string(train_cfg.strategy)},
        {"loss", train_cfg.loss == motkit::EmbedLoss::Tcl ? "tcl" : "ce"},
        {"seed", std::to_string(train_cfg.seed)},
        {"epochs", std::to_string(train_cfg.epochs)},
        {"n_keypoints", std::to_string(train_cfg.n_keypoints)},
        {"channels", std::to_string(sc.channels)},
        {"out_dim", std::to_string(train_cfg.out_dim)},
        {"tau", motkit::format_double17(train_cfg.tau)},
        {"alpha", motkit::format_double17(train_cfg.alpha)},
        {"stride", motkit::format_double17(sc.stride)},
        {"offset_units",
         train_cfg.offset_units == motkit::OffsetUnits::BoxNormalized ? "box" : "pixels"},
    };
    motkit::save_checkpoint(out / "checkpoint.txt", result.model, meta);
    motkit::write_loss_csv(out / "loss.csv", result.history);

    const auto embedded =
        motkit::embed_dataset(result.model, sc.frames, train_cfg.offset_units);
    motkit::write_embedding_dump(out / "embeddings.csv", embedded, sc.label_to_id);

    std::cout << "trained " << train_cfg.epochs << " epochs over " << sc.frames.size()
              << " frames; " << result.history.size() << " iterations logged\n";
    if (!result.history.empty())
        std::cout << "final head loss: "
                  << motkit::format_double17(result.history.back().l_tcl) << "\n";
    std::cout << "separation ratio (intra/inter cosine distance): "
              << motkit::format_double17(motkit::separation_ratio(embedded)) << "\n";
    std::cout << "wrote checkpoint.txt loss.csv embeddings.csv\n";
    return 0;
}

// ---------------------------------------------------------------- track

int cmd_track(const CommonOpts& opts, const std::string& det_file, const std::string& emb_file,
              const std::string& checkpoint_file, const std::string& scenario_dir,
              const std::string& preset, const std::string& beta) {
    motkit::RunConfig cfg = build_config(opts);
    if (preset == "mot20") {
        cfg.set("track.kappa1", "0.25");
        cfg.set("track.kappa3", "0.5");
    } else if (!preset.empty() && preset != "default") {
        throw std::runtime_error("unknown preset '" + preset + "' (default, mot20)");
    }
    if (!beta.empty()) cfg.set("track.beta_mode", beta);
    const fs::path out = resolve_out_dir(opts);
    emit_effective_config(cfg, out);

    std::vector<std::vector<motkit::Detection>> frames;
    if (!checkpoint_file.empty()) {
        if (scenario_dir.empty())
            throw std::runtime_error("--checkpoint requires --scenario");
        const motkit::Checkpoint ck = motkit::load_checkpoint(checkpoint_file);
        const motkit::OffsetUnits units = ck.metadata.count("offset_units") &&
                                                  ck.metadata.at("offset_units") == "box"
                                              ? motkit::OffsetUnits::BoxNormalized
                                              : motkit::OffsetUnits::FeatureMapPixels;
        const auto det_lines = motkit::read_mot_file(fs::path(scenario_dir) / "det.txt");
        long max_frame = 0;
        for (const auto& l : det_lines) max_frame = std::max(max_frame, l.frame);
        frames.resize(static_cast<std::size_t>(max_frame));
        for (const auto& l : det_lines) {
            motkit::Detection det;
            det.frame = l.frame;
            det.box = {l.left, l.top, l.width, l.height};
            det.confidence = l.conf;
            frames[static_cast<std::size_t>(l.frame - 1)].push_back(det);
        }
        for (long frame = 1; frame <= max_frame; ++frame) {
            const fs::path fmap_path =
                fs::path(scenario_dir) / "frames" / frame_file_name(frame);
            if (!fs::exists(fmap_path))
                throw std::runtime_error("missing feature map " + fmap_path.string());
            const motkit::FeatureMapFile fmap = motkit::read_feature_map(fmap_path);
            for (auto& det : frames[static_cast<std::size_t>(frame - 1)]) {
                motkit::ViewTape tape =
                    motkit::forward_views(fmap.map, motkit::to_map_scale(det.box, fmap.stride),
                                          ck.model.offset, ck.model.proj, {units});
                det.embedding = motkit::concat_views(tape.outputs());
            }
        }
    } else {
        if (det_file.empty() || emb_file.empty())
            throw std::runtime_error("track needs --det plus --emb, or --checkpoint plus --scenario");
        frames = motkit::join_detections(motkit::read_mot_file(det_file),
                                         motkit::read_embedding_sidecar(emb_file));
    }

    const auto results = motkit::run_sequence(frames, cfg.tracker());
    std::vector<motkit::MotLine> out_lines;
    long matched = 0;
    for (const auto& r : results) {
        matched += static_cast<long>(r.matches.size());
        for (const auto& o : r.outputs)
            out_lines.push_back({r.frame, o.id, o.box.left, o.box.top, o.box.width,
                                 o.box.height, o.confidence, -1.0, -1.0, -1.0});
    }
    motkit::write_mot_file(out / "results.txt", out_lines);
    std::cout << "tracked " << frames.size() << " frames, " << out_lines.size()
              << " output boxes, " << matched << " matches\n"
              << "wrote results.txt\n";
    return 0;
}

// ------------------------------------------------------------- evaluate

int cmd_evaluate(const std::string& gt_file, const std::string& result_file,
                 const std::string& report_file) {
    const auto gt = motkit::group_by_frame(motkit::read_mot_file(gt_file));
    const auto hyp = motkit::group_by_frame(motkit::read_mot_file(result_file));
    const motkit::EvalResult r = motkit::evaluate_sequences(gt, hyp);

    std::printf("%8s %8s %8s %8s %8s %8s %8s %8s\n", "IDF1", "MOTA", "MOTP", "MT", "ML", "FP",
                "FN", "IDS");
    std::printf("%8.4f %8.4f %8.4f %7.1f%% %7.1f%% %8ld %8ld %8ld\n", r.idf1, r.mota, r.motp,
                100.0 * r.mt, 100.0 * r.ml, r.fp, r.fn, r.ids);

    if (!report_file.empty()) {
        json j{{"idf1", r.idf1},
               {"mota", r.mota},
               {"motp", r.motp},
               {"mt", r.mt},
               {"ml", r.ml},
               {"fp", r.fp},
               {"fn", r.fn},
               {"ids", r.ids},
               {"tp", r.tp},
               {"gt_total", r.gt_total},
               {"identities", r.identities},
               {"mostly_tracked", r.mostly_tracked},
               {"mostly_lost", r.mostly_lost}};
        std::ofstream out(report_file);
        if (!out) throw std::runtime_error("cannot write report " + report_file);
        out << j.dump(2) << '\n';
    }
    return 0;
}

// ------------------------------------------------------------ gradcheck

int cmd_gradcheck(const CommonOpts& opts, int trials, double tolerance, bool corrupt) {
    motkit::RunConfig cfg = build_config(opts);
    const motkit::GradCheckReport report =
        motkit::run_grad_checks(trials, cfg.seed(), tolerance, corrupt);

    std::printf("gradient check: %d trials, tolerance %.1e\n", report.trials,
                report.tolerance);
    for (const auto& e : report.per_param)
        std::printf("  %-12s max rel err %.3e %s\n", e.name.c_str(), e.max_rel_error,
                    e.max_rel_error > report.tolerance ? "FAIL" : "ok");
    if (!report.passed()) {
        std::printf("FAILED: %d parameter group(s) beyond tolerance\n", report.failures);
        return 2;
    }
    std::printf("all gradients verified\n");
    return 0;
}

// ----------------------------------------------------------------- bench

int cmd_bench(const CommonOpts& opts) {
    motkit::RunConfig cfg = build_config(opts);
    const motkit::Scenario sc = motkit::generate_scenario(cfg.scenario());
    std::vector<std::vector<motkit::Detection>> frames;
    frames.reserve(sc.frames.size());
    for (const auto& f : sc.frames) frames.push_back(f.detections);

    motkit::Tracker tracker(cfg.tracker());
    const auto start = std::chrono::steady_clock::now();
    long matches = 0;
    for (const auto& dets : frames) matches += static_cast<long>(tracker.associate_frame(dets).matches.size());
    const auto stop = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(stop - start).count();
    std::printf("associated %zu frames (%ld matches) in %.3fs: %.1f frames/sec\n",
                frames.size(), matches, seconds,
                static_cast<double>(frames.size()) / std::max(seconds, 1e-9));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale multi-object tracking: simulator, trajectory-contrastive "
                 "training, tracker and CLEAR-MOT evaluation"};
    app.require_subcommand(1);

    CommonOpts sim_opts;
    bool sim_features = false, sim_noiseless = false;
    auto* sim = app.add_subcommand("simulate", "generate a synthetic scenario");
    add_common(sim, sim_opts, true);
    sim->add_flag("--features", sim_features, "also write per-frame feature maps");
    sim->add_flag("--noiseless", sim_noiseless, "disable noise, drops and occlusion effects");

    CommonOpts train_opts;
    std::string train_scenario;
    auto* train = app.add_subcommand("train", "train the embedding heads on a scenario");
    add_common(train, train_opts, true);
    train->add_option("--scenario", train_scenario, "scenario directory from simulate --features")
        ->required();

    CommonOpts track_opts;
    std::string track_det, track_emb, track_ckpt, track_scenario, track_preset, track_beta;
    auto* track = app.add_subcommand("track", "run the tracker over detections");
    add_common(track, track_opts, true);
    track->add_option("--det", track_det, "MOT detection file");
    track->add_option("--emb", track_emb, "embedding sidecar for --det");
    track->add_option("--checkpoint", track_ckpt, "trained checkpoint (with --scenario)");
    track->add_option("--scenario", track_scenario, "scenario directory for --checkpoint");
    track->add_option("--preset", track_preset, "threshold preset: default or mot20");
    track->add_option("--beta", track_beta, "fusion mode: adaptive or fixed:<value>");

    std::string eval_gt, eval_result, eval_report;
    auto* eval = app.add_subcommand("evaluate", "CLEAR-MOT metrics for a result file");
    eval->add_option("--gt", eval_gt, "ground-truth MOT file")->required();
    eval->add_option("--result", eval_result, "tracker result MOT file")->required();
    eval->add_option("--report", eval_report, "write a JSON report here");

    CommonOpts grad_opts;
    int grad_trials = 100;
    double grad_tolerance = 1e-4;
    bool grad_corrupt = false;
    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    add_common(grad, grad_opts, false);
    grad->add_option("--trials", grad_trials, "random configurations to check");
    grad->add_option("--tolerance", grad_tolerance, "max relative error");
    grad->add_flag("--corrupt", grad_corrupt)->group("");  // harness sanity hook

    CommonOpts bench_opts;
    auto* bench = app.add_subcommand("bench", "associate_frame throughput");
    add_common(bench, bench_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_opts, sim_features, sim_noiseless);
        if (train->parsed()) return cmd_train(train_opts, train_scenario);
        if (track->parsed())
            return cmd_track(track_opts, track_det, track_emb, track_ckpt, track_scenario,
                             track_preset, track_beta);
        if (eval->parsed()) return cmd_evaluate(eval_gt, eval_result, eval_report);
        if (grad->parsed())
            return cmd_gradcheck(grad_opts, grad_trials, grad_tolerance, grad_corrupt);
        if (bench->parsed()) return cmd_bench(bench_opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
