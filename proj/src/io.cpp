#include "trackmine/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace trackmine {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw DataError("cannot open file: " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    return out;
}

ordered_json parse_line(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
    try {
        return ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed line: " + e.what());
    }
}

void check_header(const ordered_json& header, const std::string& kind,
                  const std::filesystem::path& path) {
    if (!header.contains("schema_version") || !header["schema_version"].is_number_integer())
        throw DataError(path.string() + ":1: missing schema_version header");
    int version = header["schema_version"].get<int>();
    if (version != kSchemaVersion)
        throw DataError(path.string() + ": unsupported schema version " + std::to_string(version) +
                        " (expected " + std::to_string(kSchemaVersion) + ")");
    if (header.value("kind", std::string()) != kind)
        throw DataError(path.string() + ":1: expected kind '" + kind + "'");
}

ordered_json make_header(const std::string& kind) {
    ordered_json h;
    h["schema_version"] = kSchemaVersion;
    h["kind"] = kind;
    return h;
}

ordered_json bbox_to_json(const BBox& b) { return ordered_json::array({b.x, b.y, b.w, b.h}); }

BBox bbox_from_json(const ordered_json& j, const std::filesystem::path& path, std::size_t lineno) {
    if (!j.is_array() || j.size() != 4)
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": bbox must be [x,y,w,h]");
    BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!b.valid())
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": invalid bbox (w,h must be > 0)");
    return b;
}

}  // namespace

ProposalGroups read_proposals(const std::filesystem::path& path,
                              std::optional<std::uint32_t> embedding_count) {
    auto in = open_input(path);
    ProposalGroups out;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::map<std::string, int> last_frame;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = parse_line(line, path, lineno);
        if (!have_header) {
            check_header(j, "proposals", path);
            have_header = true;
            continue;
        }
        ProposalRecord rec;
        try {
            rec.sequence_id = j.at("sequence_id").get<std::string>();
            rec.frame = j.at("frame").get<int>();
            rec.bbox = bbox_from_json(j.at("bbox"), path, lineno);
            rec.objectness = j.at("objectness").get<double>();
            if (j.contains("class_scores"))
                rec.class_scores = j["class_scores"].get<std::map<std::string, double>>();
            rec.embedding_index = j.at("embedding_index").get<std::uint32_t>();
            if (j.contains("centroid_3d") && !j["centroid_3d"].is_null()) {
                const auto& c = j["centroid_3d"];
                rec.centroid_3d = Vec3{c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
        }
        if (rec.frame < 0)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": negative frame");
        if (embedding_count && rec.embedding_index >= *embedding_count)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": embedding_index " +
                            std::to_string(rec.embedding_index) + " out of range (count " +
                            std::to_string(*embedding_count) + ")");
        auto it = last_frame.find(rec.sequence_id);
        if (it != last_frame.end() && rec.frame < it->second)
            throw DataError(path.string() + ":" + std::to_string(lineno) +
                            ": frames must be non-decreasing within sequence '" + rec.sequence_id + "'");
        last_frame[rec.sequence_id] = rec.frame;
        out.records.push_back(std::move(rec));
    }
    if (!have_header && lineno > 0)
        throw DataError(path.string() + ": missing header line");
    // group consecutive records sharing (sequence, frame)
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= out.records.size(); ++i) {
        bool boundary = i == out.records.size() ||
                        (i > begin && (out.records[i].sequence_id != out.records[begin].sequence_id ||
                                       out.records[i].frame != out.records[begin].frame));
        if (boundary && i > begin) {
            out.groups.push_back({{out.records[begin].sequence_id, out.records[begin].frame}, {begin, i}});
            begin = i;
        }
    }
    return out;
}

void write_proposals(const std::vector<ProposalRecord>& records, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << make_header("proposals").dump() << '\n';
    for (const auto& rec : records) {
        ordered_json j;
        j["sequence_id"] = rec.sequence_id;
        j["frame"] = rec.frame;
        j["bbox"] = bbox_to_json(rec.bbox);
        j["objectness"] = rec.objectness;
        j["class_scores"] = rec.class_scores;
        j["embedding_index"] = rec.embedding_index;
        if (rec.centroid_3d)
            j["centroid_3d"] = ordered_json::array({(*rec.centroid_3d)[0], (*rec.centroid_3d)[1],
                                                    (*rec.centroid_3d)[2]});
        out << j.dump() << '\n';
    }
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
    auto in = open_input(path, std::ios::in | std::ios::binary);
    char magic[8];
    std::uint32_t count = 0, dim = 0;
    if (!in.read(magic, 8) || std::memcmp(magic, kEmbeddingMagic, 8) != 0)
        throw DataError(path.string() + ": bad embedding file magic");
    if (!in.read(reinterpret_cast<char*>(&count), 4) || !in.read(reinterpret_cast<char*>(&dim), 4))
        throw DataError(path.string() + ": truncated embedding header");
    std::uint64_t expected = 16ULL + 4ULL * count * dim;
    std::uint64_t actual = std::filesystem::file_size(path);
    if (actual != expected)
        throw DataError(path.string() + ": truncated or oversized payload (expected " +
                        std::to_string(expected) + " bytes, found " + std::to_string(actual) + ")");
    EmbeddingMatrix m;
    m.count = count;
    m.dim = dim;
    m.data.resize(static_cast<std::size_t>(count) * dim);
    if (!m.data.empty() &&
        !in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * 4)))
        throw DataError(path.string() + ": truncated embedding payload");
    for (float f : m.data)
        if (!std::isfinite(f)) throw DataError(path.string() + ": non-finite embedding entry");
    return m;
}

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
    auto out = open_output(path, std::ios::out | std::ios::binary);
    out.write(kEmbeddingMagic, 8);
    out.write(reinterpret_cast<const char*>(&m.count), 4);
    out.write(reinterpret_cast<const char*>(&m.dim), 4);
    if (!m.data.empty())
        out.write(reinterpret_cast<const char*>(m.data.data()),
                  static_cast<std::streamsize>(m.data.size() * 4));
}

TrackCollection read_tracks(const std::filesystem::path& path) {
    auto in = open_input(path);
    TrackCollection collection;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = parse_line(line, path, lineno);
        if (!have_header) {
            check_header(j, "tracks", path);
            have_header = true;
            continue;
        }
        Track t;
        try {
            t.track_id = j.at("track_id").get<std::int64_t>();
            t.sequence_id = j.at("sequence_id").get<std::string>();
            std::string kind = j.at("label_kind").get<std::string>();
            if (kind == "known")
                t.label = TrackLabel::known(j.at("category").get<std::string>());
            else if (kind == "unknown")
                t.label = TrackLabel::unknown();
            else
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad label_kind '" + kind + "'");
            t.source = j.value("source", std::string());
            for (const auto& e : j.at("elements")) {
                TrackElement el;
                el.frame = e.at("frame").get<int>();
                el.bbox = bbox_from_json(e.at("bbox"), path, lineno);
                el.embedding_index = e.at("embedding_index").get<std::uint32_t>();
                if (e.contains("centroid_3d") && !e["centroid_3d"].is_null()) {
                    const auto& c = e["centroid_3d"];
                    el.centroid_3d = Vec3{c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
                }
                if (!t.elements.empty() && el.frame <= t.elements.back().frame)
                    throw DataError(path.string() + ":" + std::to_string(lineno) +
                                    ": track frames must be strictly increasing");
                t.elements.push_back(std::move(el));
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed track: " + e.what());
        }
        collection.tracks.push_back(std::move(t));
    }
    if (!have_header && lineno > 0) throw DataError(path.string() + ": missing header line");
    return collection;
}

void write_tracks(const TrackCollection& collection, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << make_header("tracks").dump() << '\n';
    for (const auto& t : collection.tracks) {
        ordered_json j;
        j["track_id"] = t.track_id;
        j["sequence_id"] = t.sequence_id;
        j["label_kind"] = t.label.is_known() ? "known" : "unknown";
        if (t.label.is_known()) j["category"] = t.label.category;
        j["source"] = t.source;
        auto elements = ordered_json::array();
        for (const auto& e : t.elements) {
            ordered_json el;
            el["frame"] = e.frame;
            el["bbox"] = bbox_to_json(e.bbox);
            el["embedding_index"] = e.embedding_index;
            if (e.centroid_3d)
                el["centroid_3d"] = ordered_json::array({(*e.centroid_3d)[0], (*e.centroid_3d)[1],
                                                         (*e.centroid_3d)[2]});
            elements.push_back(std::move(el));
        }
        j["elements"] = std::move(elements);
        out << j.dump() << '\n';
    }
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<AnnotationRecord> out;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = parse_line(line, path, lineno);
        if (!have_header) {
            check_header(j, "annotations", path);
            have_header = true;
            continue;
        }
        try {
            out.push_back({j.at("track_id").get<std::int64_t>(), j.at("gt_label").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed annotation: " + e.what());
        }
    }
    if (!have_header && lineno > 0) throw DataError(path.string() + ": missing header line");
    return out;
}

void write_annotations(const std::vector<AnnotationRecord>& records,
                       const std::filesystem::path& path) {
    auto out = open_output(path);
    out << make_header("annotations").dump() << '\n';
    for (const auto& rec : records) {
        ordered_json j;
        j["track_id"] = rec.track_id;
        j["gt_label"] = rec.gt_label;
        out << j.dump() << '\n';
    }
}

ClusterAssignment read_assignment(const std::filesystem::path& path) {
    auto in = open_input(path);
    ClusterAssignment a;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line != "track_id,cluster_id,outlier_score")
                throw DataError(path.string() + ": unexpected CSV header '" + line + "'");
            continue;
        }
        std::istringstream ss(line);
        std::string f0, f1, f2;
        if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') || !std::getline(ss, f2))
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed CSV row");
        try {
            a.track_ids.push_back(std::stoll(f0));
            a.cluster_ids.push_back(std::stoll(f1));
            a.outlier_scores.push_back(f2 == "inf" ? std::numeric_limits<double>::infinity()
                                                   : std::stod(f2));
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed CSV value");
        }
    }
    return a;
}

void write_assignment(const ClusterAssignment& assignment, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << "track_id,cluster_id,outlier_score\n";
    for (std::size_t i = 0; i < assignment.track_ids.size(); ++i) {
        out << assignment.track_ids[i] << ',' << assignment.cluster_ids[i] << ','
            << format_double(assignment.outlier_scores[i]) << '\n';
    }
}

}  // namespace trackmine
