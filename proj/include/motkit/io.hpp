// File formats: MOTChallenge text lines, embedding sidecars, loss CSVs,
// parameter checkpoints and per-frame feature-map binaries.
//
// Doubles in MOT lines are written with the shortest representation that
// round-trips exactly; sidecar/CSV/checkpoint values use 17 significant
// digits. Either way read(write(x)) == x bit-exactly.
#pragma once

#include "motkit/core.hpp"
#include "motkit/feature_map.hpp"
#include "motkit/metrics.hpp"
#include "motkit/trainer.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace motkit {

// ---------------------------------------------------------------- text

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline std::string format_double17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const char* what, long line_number) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end)
        throw std::runtime_error(std::string(what) + ": non-numeric field '" + s +
                                 "' at line " + std::to_string(line_number));
    return out;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

// ------------------------------------------------------------ MOT lines

// frame, id, bb_left, bb_top, bb_width, bb_height, conf, x, y, z.
// x/y/z are -1 for 2D data; id is -1 for raw detections.
struct MotLine {
    long frame = 0;
    long id = -1;
    double left = 0.0, top = 0.0, width = 0.0, height = 0.0;
    double conf = 1.0;
    double x = -1.0, y = -1.0, z = -1.0;
};

inline MotLine parse_mot_line(const std::string& text, long line_number = 0) {
    const auto fields = split_csv(text);
    if (fields.size() != 10)
        throw std::runtime_error("mot line " + std::to_string(line_number) + ": expected 10 fields, got " +
                                 std::to_string(fields.size()));
    MotLine l;
    l.frame = static_cast<long>(parse_double(fields[0], "mot frame", line_number));
    l.id = static_cast<long>(parse_double(fields[1], "mot id", line_number));
    l.left = parse_double(fields[2], "mot bb_left", line_number);
    l.top = parse_double(fields[3], "mot bb_top", line_number);
    l.width = parse_double(fields[4], "mot bb_width", line_number);
    l.height = parse_double(fields[5], "mot bb_height", line_number);
    l.conf = parse_double(fields[6], "mot conf", line_number);
    l.x = parse_double(fields[7], "mot x", line_number);
    l.y = parse_double(fields[8], "mot y", line_number);
    l.z = parse_double(fields[9], "mot z", line_number);
    if (l.frame < 1)
        throw std::runtime_error("mot line " + std::to_string(line_number) + ": frame must be >= 1");
    return l;
}

inline std::string write_mot_line(const MotLine& l) {
    std::string out;
    out += std::to_string(l.frame);
    out += ',';
    out += std::to_string(l.id);
    for (double v : {l.left, l.top, l.width, l.height, l.conf, l.x, l.y, l.z}) {
        out += ',';
        out += format_double(v);
    }
    return out;
}

inline std::vector<MotLine> read_mot_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<MotLine> lines;
    std::string line;
    long n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line[0] == '#') continue;
        lines.push_back(parse_mot_line(line, n));
    }
    return lines;
}

inline void write_mot_file(const std::filesystem::path& path, const std::vector<MotLine>& lines) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& l : lines) out << write_mot_line(l) << '\n';
}

inline std::vector<GroundTruthFrame> group_by_frame(const std::vector<MotLine>& lines) {
    std::map<long, GroundTruthFrame> frames;
    for (const auto& l : lines) {
        auto& f = frames[l.frame];
        f.frame = l.frame;
        f.boxes.push_back({l.id, {l.left, l.top, l.width, l.height}});
    }
    std::vector<GroundTruthFrame> out;
    out.reserve(frames.size());
    for (auto& [frame, f] : frames) out.push_back(std::move(f));
    return out;
}

// -------------------------------------------------------------- sidecar

// Embedding sidecar: header line "D=<dim>", then one CSV row per
// detection: frame, det_index (0-based within the frame), D values.
inline void write_embedding_sidecar(const std::filesystem::path& path,
                                    const std::vector<std::vector<Detection>>& frames) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    int dim = 0;
    for (const auto& frame : frames)
        for (const auto& det : frame) dim = static_cast<int>(det.embedding.size());
    out << "D=" << dim << '\n';
    for (std::size_t f = 0; f < frames.size(); ++f) {
        for (std::size_t d = 0; d < frames[f].size(); ++d) {
            const auto& det = frames[f][d];
            out << det.frame << ',' << d;
            for (Eigen::Index k = 0; k < det.embedding.size(); ++k)
                out << ',' << format_double17(det.embedding(k));
            out << '\n';
        }
    }
}

struct SidecarRow {
    long frame = 0;
    long det_index = 0;
    Embedding embedding;
};

inline std::vector<SidecarRow> read_embedding_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding sidecar " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("D=", 0) != 0)
        throw std::runtime_error("embedding sidecar " + path.string() +
                                 ": missing D=<dim> header");
    const int dim = std::stoi(line.substr(2));
    if (dim < 1) throw std::runtime_error("embedding sidecar: bad dimension");

    std::vector<SidecarRow> rows;
    long n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (static_cast<int>(fields.size()) != dim + 2)
            throw std::runtime_error("embedding sidecar line " + std::to_string(n) +
                                     ": expected " + std::to_string(dim + 2) + " fields");
        SidecarRow row;
        row.frame = static_cast<long>(parse_double(fields[0], "sidecar frame", n));
        row.det_index = static_cast<long>(parse_double(fields[1], "sidecar det", n));
        row.embedding.resize(dim);
        for (int k = 0; k < dim; ++k)
            row.embedding(k) = parse_double(fields[static_cast<std::size_t>(k) + 2], "sidecar value", n);
        rows.push_back(std::move(row));
    }
    return rows;
}

// Joins a detection file with its sidecar into per-frame detection
// lists (1-based frames; index 0 of the result is frame 1).
inline std::vector<std::vector<Detection>> join_detections(
    const std::vector<MotLine>& det_lines, const std::vector<SidecarRow>& emb_rows) {
    long max_frame = 0;
    for (const auto& l : det_lines) max_frame = std::max(max_frame, l.frame);
    std::vector<std::vector<Detection>> frames(static_cast<std::size_t>(max_frame));
    for (const auto& l : det_lines) {
        Detection det;
        det.frame = l.frame;
        det.box = {l.left, l.top, l.width, l.height};
        det.confidence = l.conf;
        frames[static_cast<std::size_t>(l.frame - 1)].push_back(std::move(det));
    }
    for (const auto& row : emb_rows) {
        if (row.frame < 1 || row.frame > max_frame)
            throw std::runtime_error("sidecar references frame " + std::to_string(row.frame) +
                                     " outside the detection file");
        auto& frame = frames[static_cast<std::size_t>(row.frame - 1)];
        if (row.det_index < 0 || row.det_index >= static_cast<long>(frame.size()))
            throw std::runtime_error("sidecar references detection " +
                                     std::to_string(row.det_index) + " missing in frame " +
                                     std::to_string(row.frame));
        frame[static_cast<std::size_t>(row.det_index)].embedding = row.embedding;
    }
    for (const auto& frame : frames)
        for (const auto& det : frame)
            if (det.embedding.size() == 0)
                throw std::runtime_error("detection in frame " + std::to_string(det.frame) +
                                         " has no sidecar embedding");
    return frames;
}

// ------------------------------------------------------------ loss CSV

inline void write_loss_csv(const std::filesystem::path& path,
                           const std::vector<LossRecord>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,iteration,l_tcl,l_det,l_total,eta1,eta2\n";
    for (const auto& r : history)
        out << r.epoch << ',' << r.iteration << ',' << format_double17(r.l_tcl) << ','
            << format_double17(r.l_det) << ',' << format_double17(r.l_total) << ','
            << format_double17(r.eta1) << ',' << format_double17(r.eta2) << '\n';
}

// Embedding dump: "D=<dim>" header, then trajectory_id, frame, D values.
inline void write_embedding_dump(const std::filesystem::path& path,
                                 const std::vector<InstanceEmbedding>& rows,
                                 const std::vector<long>& label_to_id) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const int dim = rows.empty() ? 0 : static_cast<int>(rows.front().embedding.size());
    out << "D=" << dim << '\n';
    for (const auto& r : rows) {
        out << label_to_id[static_cast<std::size_t>(r.label)] << ',' << r.frame;
        for (Eigen::Index k = 0; k < r.embedding.size(); ++k)
            out << ',' << format_double17(r.embedding(k));
        out << '\n';
    }
}

// ----------------------------------------------------------- checkpoint

// Versioned text checkpoint:
//   motkit-checkpoint v1
//   meta <key> <value...>
//   tensor <name> <rows> <cols> followed by <rows> value lines
//   scalar <name> <value>
//   end
inline void save_checkpoint(const std::filesystem::path& path, const EmbedModel& model,
                            const std::map<std::string, std::string>& metadata) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "motkit-checkpoint v1\n";
    for (const auto& [k, v] : metadata) out << "meta " << k << ' ' << v << '\n';

    auto tensor = [&out](const std::string& name, const Eigen::MatrixXd& m) {
        out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                if (c) out << ' ';
                out << format_double17(m(r, c));
            }
            out << '\n';
        }
    };
    tensor("offset.w", model.offset.weight);
    for (std::size_t l = 0; l < 4; ++l) {
        tensor("proj" + std::to_string(l + 1) + ".w", model.proj.layers[l].w);
        tensor("proj" + std::to_string(l + 1) + ".b", model.proj.layers[l].b.transpose());
    }
    if (model.classifier_w.size() > 0) {
        tensor("cls.w", model.classifier_w);
        tensor("cls.b", model.classifier_b.transpose());
    }
    out << "scalar eta1 " << format_double17(model.weights.eta1) << '\n';
    out << "scalar eta2 " << format_double17(model.weights.eta2) << '\n';
    out << "end\n";
}

struct Checkpoint {
    EmbedModel model;
    std::map<std::string, std::string> metadata;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "motkit-checkpoint v1")
        throw std::runtime_error("checkpoint " + path.string() + ": bad header");

    Checkpoint ck;
    std::map<std::string, Eigen::MatrixXd> tensors;
    std::map<std::string, double> scalars;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string kind;
        ss >> kind;
        if (kind == "end") break;
        if (kind == "meta") {
            std::string key;
            ss >> key;
            std::string value;
            std::getline(ss, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ck.metadata[key] = value;
        } else if (kind == "scalar") {
            std::string name;
            double v;
            ss >> name >> v;
            scalars[name] = v;
        } else if (kind == "tensor") {
            std::string name;
            Eigen::Index rows, cols;
            ss >> name >> rows >> cols;
            Eigen::MatrixXd m(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                if (!std::getline(in, line))
                    throw std::runtime_error("checkpoint: truncated tensor " + name);
                std::istringstream row(line);
                for (Eigen::Index c = 0; c < cols; ++c)
                    if (!(row >> m(r, c)))
                        throw std::runtime_error("checkpoint: bad tensor row in " + name);
            }
            tensors[name] = std::move(m);
        } else {
            throw std::runtime_error("checkpoint: unknown record '" + kind + "'");
        }
    }

    auto need = [&tensors](const std::string& name) -> const Eigen::MatrixXd& {
        auto it = tensors.find(name);
        if (it == tensors.end())
            throw std::runtime_error("checkpoint: missing tensor " + name);
        return it->second;
    };
    ck.model.offset.weight = need("offset.w");
    for (std::size_t l = 0; l < 4; ++l) {
        ck.model.proj.layers[l].w = need("proj" + std::to_string(l + 1) + ".w");
        ck.model.proj.layers[l].b =
            need("proj" + std::to_string(l + 1) + ".b").row(0).transpose();
    }
    if (tensors.count("cls.w")) {
        ck.model.classifier_w = tensors.at("cls.w");
        ck.model.classifier_b = need("cls.b").row(0).transpose();
    }
    ck.model.weights.eta1 = scalars.count("eta1") ? scalars.at("eta1") : 0.0;
    ck.model.weights.eta2 = scalars.count("eta2") ? scalars.at("eta2") : 0.0;
    return ck;
}

// ----------------------------------------------------- feature-map file

// Little-endian binary: "MKFM", u32 version, i32 height/width/channels,
// f64 stride, i64 frame, then height*width*channels doubles cell-major.
inline void write_feature_map(const std::filesystem::path& path, const FeatureMap& map,
                              double stride, long frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const char magic[4] = {'M', 'K', 'F', 'M'};
    const std::uint32_t version = 1;
    const std::int32_t dims[3] = {map.height, map.width, map.channels};
    const std::int64_t frame64 = frame;
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(&stride), sizeof(stride));
    out.write(reinterpret_cast<const char*>(&frame64), sizeof(frame64));
    for (Eigen::Index i = 0; i < map.values.rows(); ++i)
        for (Eigen::Index c = 0; c < map.values.cols(); ++c) {
            const double v = map.values(i, c);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
}

struct FeatureMapFile {
    FeatureMap map;
    double stride = 1.0;
    long frame = 0;
};

inline FeatureMapFile read_feature_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open feature map " + path.string());
    char magic[4];
    std::uint32_t version = 0;
    std::int32_t dims[3];
    FeatureMapFile out;
    std::int64_t frame64 = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    in.read(reinterpret_cast<char*>(&out.stride), sizeof(out.stride));
    in.read(reinterpret_cast<char*>(&frame64), sizeof(frame64));
    if (!in || std::string(magic, 4) != "MKFM" || version != 1)
        throw std::runtime_error("feature map " + path.string() + ": bad header");
    out.frame = frame64;
    out.map = FeatureMap(dims[0], dims[1], dims[2]);
    for (Eigen::Index i = 0; i < out.map.values.rows(); ++i)
        for (Eigen::Index c = 0; c < out.map.values.cols(); ++c) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof(v));
            out.map.values(i, c) = v;
        }
    if (!in) throw std::runtime_error("feature map " + path.string() + ": truncated");
    return out;
}

} // namespace motkit
