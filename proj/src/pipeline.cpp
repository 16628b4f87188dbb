#include "trackmine/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "trackmine/eval.hpp"
#include "trackmine/io.hpp"
#include "trackmine/rng.hpp"

namespace trackmine {

using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("expected boolean, got '" + v + "'");
}

std::string hash_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot hash missing input: " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void ensure_output_dir(const PipelineConfig& config) {
    if (config.output_dir.empty()) throw UsageError("--output-dir is required");
    std::filesystem::create_directories(config.output_dir);
}

void require_input(const std::filesystem::path& p, const std::string& what) {
    if (p.empty()) throw UsageError(what + " path is required");
    if (!std::filesystem::exists(p)) throw DataError(what + " file not found: " + p.string());
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
    if (key == "proposals") proposals_path = value;
    else if (key == "embeddings") embeddings_path = value;
    else if (key == "annotations") annotations_path = value;
    else if (key == "calibration") calibration_path = value;
    else if (key == "tracks") tracks_path = value;
    else if (key == "assignment") assignment_path = value;
    else if (key == "output_dir") output_dir = value;
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "jobs") jobs = std::stoi(value);
    else if (key == "duration_hours") duration_hours = std::stod(value);
    else if (key == "frames") frames_override = std::stoll(value);
    else if (key == "proposals_total") proposals_total_override = std::stoll(value);
    else if (key == "tracker.iou_gate") tracker.iou_gate = std::stod(value);
    else if (key == "tracker.embedding_gate")
        tracker.embedding_gate = value == "none" ? std::nullopt : std::optional<double>(std::stod(value));
    else if (key == "tracker.max_gap") tracker.max_gap = std::stoi(value);
    else if (key == "tracker.min_length") tracker.min_length = std::stoi(value);
    else if (key == "tracker.confidence_threshold") tracker.confidence_threshold = std::stod(value);
    else if (key == "merge_riders") merge_riders = parse_bool(value);
    else if (key == "rider_merge_distance") rider_merge_distance = std::stod(value);
    else if (key == "discovery.method") {
        if (value != "kmeans" && value != "hdbscan")
            throw UsageError("discovery.method must be kmeans or hdbscan");
        method = value;
    }
    else if (key == "discovery.k") kmeans_k = std::stoull(value);
    else if (key == "discovery.min_cluster_size") hdbscan_params.min_cluster_size = std::stoi(value);
    else if (key == "discovery.min_samples") hdbscan_params.min_samples = std::stoi(value);
    else if (key == "discovery.metric") hdbscan_params.metric = metric_from_string(value);
    else if (key == "discovery.include_known") include_known = parse_bool(value);
    else if (key == "eval.known_categories") {
        known_categories.clear();
        std::istringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) known_categories.insert(item);
    }
    else if (key == "eval.sweep_fractions") sweep_fractions = parse_double_list(value);
    else if (key == "trainset.stride") anchor_stride = std::stoi(value);
    else if (key == "trainset.scales") anchor_scales = parse_double_list(value);
    else if (key == "trainset.ratios") anchor_ratios = parse_double_list(value);
    else if (key == "trainset.mode") {
        if (value == "finetune") trainset_mode = TrainsetMode::Finetune;
        else if (value == "discover") trainset_mode = TrainsetMode::Discover;
        else throw UsageError("trainset.mode must be finetune or discover");
    }
    else if (key == "trainset.positive_iou_min") positive_iou_min = std::stod(value);
    else if (key == "trainset.free_fraction_min") negative_free_fraction_min = std::stod(value);
    else if (key == "trainset.negative_iou_max") negative_iou_max = std::stod(value);
    else if (key == "trainset.ground_eps") free_space.ground_eps = std::stod(value);
    else if (key == "trainset.max_height") free_space.max_height = std::stod(value);
    else if (key == "trainset.z_min") free_space.z_min = std::stod(value);
    else if (key == "trainset.z_max") free_space.z_max = std::stod(value);
    else throw UsageError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> PipelineConfig::snapshot() const {
    std::map<std::string, std::string> m;
    m["proposals"] = proposals_path.string();
    m["embeddings"] = embeddings_path.string();
    m["annotations"] = annotations_path.string();
    m["calibration"] = calibration_path.string();
    m["tracks"] = tracks_path.string();
    m["assignment"] = assignment_path.string();
    m["output_dir"] = output_dir.string();
    m["seed"] = std::to_string(seed);
    m["jobs"] = std::to_string(jobs);
    m["duration_hours"] = format_double(duration_hours);
    m["frames"] = std::to_string(frames_override);
    m["proposals_total"] = std::to_string(proposals_total_override);
    m["tracker.iou_gate"] = format_double(tracker.iou_gate);
    m["tracker.embedding_gate"] =
        tracker.embedding_gate ? format_double(*tracker.embedding_gate) : "none";
    m["tracker.max_gap"] = std::to_string(tracker.max_gap);
    m["tracker.min_length"] = std::to_string(tracker.min_length);
    m["tracker.confidence_threshold"] = format_double(tracker.confidence_threshold);
    m["merge_riders"] = merge_riders ? "true" : "false";
    m["rider_merge_distance"] = format_double(rider_merge_distance);
    m["discovery.method"] = method;
    m["discovery.k"] = std::to_string(kmeans_k);
    m["discovery.min_cluster_size"] = std::to_string(hdbscan_params.min_cluster_size);
    m["discovery.min_samples"] = std::to_string(hdbscan_params.min_samples);
    m["discovery.metric"] = metric_name(hdbscan_params.metric);
    m["discovery.include_known"] = include_known ? "true" : "false";
    {
        std::string cats;
        for (const auto& c : known_categories) {
            if (!cats.empty()) cats += ',';
            cats += c;
        }
        m["eval.known_categories"] = cats;
    }
    m["eval.sweep_fractions"] = join_doubles(sweep_fractions);
    m["trainset.stride"] = std::to_string(anchor_stride);
    m["trainset.scales"] = join_doubles(anchor_scales);
    m["trainset.ratios"] = join_doubles(anchor_ratios);
    m["trainset.mode"] = trainset_mode == TrainsetMode::Finetune ? "finetune" : "discover";
    m["trainset.positive_iou_min"] = format_double(positive_iou_min);
    m["trainset.free_fraction_min"] = format_double(negative_free_fraction_min);
    m["trainset.negative_iou_max"] = format_double(negative_iou_max);
    m["trainset.ground_eps"] = format_double(free_space.ground_eps);
    m["trainset.max_height"] = format_double(free_space.max_height);
    m["trainset.z_min"] = format_double(free_space.z_min);
    m["trainset.z_max"] = format_double(free_space.z_max);
    return m;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path.string());
    PipelineConfig config;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

Calibration read_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open calibration file: " + path.string());
    ordered_json j;
    try {
        in >> j;
        Calibration c;
        c.intrinsics.fx = j.at("fx").get<double>();
        c.intrinsics.fy = j.at("fy").get<double>();
        c.intrinsics.cx = j.at("cx").get<double>();
        c.intrinsics.cy = j.at("cy").get<double>();
        c.intrinsics.image_w = j.at("image_w").get<int>();
        c.intrinsics.image_h = j.at("image_h").get<int>();
        const auto& n = j.at("plane_normal");
        c.plane.normal = Vec3{n.at(0).get<double>(), n.at(1).get<double>(), n.at(2).get<double>()};
        c.plane.offset = j.at("plane_offset").get<double>();
        if (!c.intrinsics.valid()) throw DataError(path.string() + ": invalid intrinsics");
        if (!c.plane.valid()) throw DataError(path.string() + ": plane normal must be unit length");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed calibration: " + e.what());
    }
}

void write_calibration(const Calibration& c, const std::filesystem::path& path) {
    ordered_json j;
    j["fx"] = c.intrinsics.fx;
    j["fy"] = c.intrinsics.fy;
    j["cx"] = c.intrinsics.cx;
    j["cy"] = c.intrinsics.cy;
    j["image_w"] = c.intrinsics.image_w;
    j["image_h"] = c.intrinsics.image_h;
    j["plane_normal"] = ordered_json::array({c.plane.normal[0], c.plane.normal[1], c.plane.normal[2]});
    j["plane_offset"] = c.plane.offset;
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out << j.dump(2) << '\n';
}

void write_manifest(const PipelineConfig& config, const std::string& command,
                    const std::vector<std::filesystem::path>& inputs) {
    ordered_json j;
    j["command"] = command;
    j["seed"] = config.seed;
    ordered_json cfg;
    for (const auto& [k, v] : config.snapshot()) cfg[k] = v;
    j["config"] = std::move(cfg);
    ordered_json ins;
    std::vector<std::filesystem::path> sorted = inputs;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& p : sorted)
        if (!p.empty()) ins[p.string()] = hash_file_hex(p);
    j["inputs"] = std::move(ins);
    std::ofstream out(config.output_dir / "manifest.json");
    out << j.dump(2) << '\n';
}

namespace {

ordered_json stats_to_json(const MiningStats& s) {
    ordered_json j;
    j["frames"] = s.frames;
    j["duration_h"] = s.duration_hours;
    j["proposals_all"] = s.proposals_total;
    j["tracks_total"] = s.tracks_total;
    j["tracks_labeled"] = s.tracks_labeled;
    j["tracks_unknown"] = s.tracks_unknown;
    j["tracking_errors"] = s.tracking_errors;
    j["proposals_per_frame"] = s.proposals_per_frame;
    j["compression_per_frame"] = s.compression_per_frame;
    j["error_rate"] = s.error_rate;
    j["error_rate_percent_1dp"] = percent_1dp(s.error_rate);
    j["error_rate_defined"] = s.error_rate_defined;
    return j;
}

void print_stats(const MiningStats& s) {
    std::cout << "frames: " << s.frames << '\n'
              << "duration_h: " << format_double(s.duration_hours) << '\n'
              << "proposals_all: " << s.proposals_total << '\n'
              << "tracks_total: " << s.tracks_total << '\n'
              << "tracks_labeled: " << s.tracks_labeled << '\n'
              << "tracks_unknown: " << s.tracks_unknown << '\n'
              << "tracking_errors: " << s.tracking_errors << '\n'
              << "proposals_per_frame: " << format_double(s.proposals_per_frame) << '\n'
              << "compression_per_frame: " << format_double(s.compression_per_frame) << '\n'
              << "error_rate_percent: " << format_double(percent_1dp(s.error_rate))
              << (s.error_rate_defined ? "" : " (undefined: no labeled tracks)") << '\n';
}

// class-score lookup for labeling, keyed by embedding index
std::unordered_map<std::uint32_t, const ProposalRecord*> index_proposals(const ProposalGroups& groups) {
    std::unordered_map<std::uint32_t, const ProposalRecord*> map;
    map.reserve(groups.records.size());
    for (const auto& rec : groups.records) map[rec.embedding_index] = &rec;
    return map;
}

void write_sweep_csv(const SweepCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out << "fraction,ami,is_automatic\n";
    for (const auto& p : curve.points)
        out << format_double(p.fraction) << ',' << format_double(p.ami) << ",0\n";
    if (curve.automatic_point)
        out << format_double(curve.automatic_point->fraction) << ','
            << format_double(curve.automatic_point->ami) << ",1\n";
}

}  // namespace

int cmd_build_tracks(const PipelineConfig& config) {
    ensure_output_dir(config);
    require_input(config.proposals_path, "proposals");

    EmbeddingMatrix embeddings;
    bool have_embeddings = !config.embeddings_path.empty();
    if (config.tracker.embedding_gate && !have_embeddings)
        throw UsageError("tracker.embedding_gate is enabled but no --embeddings file was given");
    if (have_embeddings) {
        require_input(config.embeddings_path, "embeddings");
        embeddings = read_embeddings(config.embeddings_path);
    }

    auto proposals = read_proposals(config.proposals_path,
                                    have_embeddings ? std::optional<std::uint32_t>(embeddings.count)
                                                    : std::nullopt);
    auto collection = build_tracks(proposals, config.tracker,
                                   have_embeddings ? &embeddings : nullptr, config.jobs);

    auto by_index = index_proposals(proposals);
    for (auto& track : collection.tracks) {
        std::vector<std::map<std::string, double>> scores;
        scores.reserve(track.elements.size());
        for (const auto& el : track.elements) {
            auto it = by_index.find(el.embedding_index);
            scores.push_back(it != by_index.end() ? it->second->class_scores
                                                  : std::map<std::string, double>{});
        }
        track.label = label_track(scores, config.tracker.confidence_threshold);
    }

    write_tracks(collection, config.output_dir / "tracks.ndjson");

    MiningCounts counts;
    counts.frames = config.frames_override > 0 ? config.frames_override
                                               : static_cast<std::int64_t>(proposals.groups.size());
    counts.duration_hours = config.duration_hours;
    counts.proposals_total = config.proposals_total_override > 0
                                 ? config.proposals_total_override
                                 : static_cast<std::int64_t>(proposals.records.size());
    counts.tracks_total = static_cast<std::int64_t>(collection.tracks.size());
    if (!config.annotations_path.empty()) {
        require_input(config.annotations_path, "annotations");
        auto annotations = read_annotations(config.annotations_path);
        auto s = mining_stats(collection, annotations, counts.frames, counts.duration_hours,
                              counts.proposals_total);
        std::ofstream(config.output_dir / "stats.json") << stats_to_json(s).dump(2) << '\n';
        print_stats(s);
    } else {
        for (const auto& t : collection.tracks)
            if (!t.label.is_known()) ++counts.tracks_unknown;
        auto s = mining_stats(counts);
        std::ofstream(config.output_dir / "stats.json") << stats_to_json(s).dump(2) << '\n';
        print_stats(s);
    }

    std::vector<std::filesystem::path> inputs{config.proposals_path};
    if (have_embeddings) inputs.push_back(config.embeddings_path);
    if (!config.annotations_path.empty()) inputs.push_back(config.annotations_path);
    write_manifest(config, "build-tracks", inputs);
    return 0;
}

int cmd_discover(const PipelineConfig& config) {
    ensure_output_dir(config);
    require_input(config.tracks_path, "tracks");
    require_input(config.embeddings_path, "embeddings");

    auto collection = read_tracks(config.tracks_path);
    auto embeddings = read_embeddings(config.embeddings_path);

    std::vector<TrackEmbedding> reps;
    for (const auto& track : collection.tracks) {
        if (!config.include_known && track.label.is_known()) continue;
        for (const auto& el : track.elements)
            if (el.embedding_index >= embeddings.count)
                throw DataError("track " + std::to_string(track.track_id) +
                                " references embedding_index " + std::to_string(el.embedding_index) +
                                " out of range");
        reps.push_back(representative_embedding(track, embeddings));
    }

    Points points = Points::zeros(reps.size(), embeddings.dim);
    for (std::size_t i = 0; i < reps.size(); ++i) {
        auto dst = points.row(i);
        for (std::size_t d = 0; d < embeddings.dim; ++d) dst[d] = reps[i].vector[d];
    }

    ClusterAssignment assignment;
    for (const auto& r : reps) assignment.track_ids.push_back(r.track_id);
    assignment.method = config.method;

    if (config.method == "kmeans") {
        if (config.kmeans_k == 0) throw UsageError("--method kmeans requires --k");
        auto result = kmeans(points, config.kmeans_k,
                             Rng::sub_seed(config.seed, "discover.kmeans"));
        assignment.cluster_ids = result.labels;
        assignment.params = "k=" + std::to_string(config.kmeans_k);
    } else {
        auto result = hdbscan(points, config.hdbscan_params, config.jobs);
        assignment.cluster_ids = result.labels;
        assignment.params = "min_cluster_size=" + std::to_string(config.hdbscan_params.min_cluster_size) +
                            ";min_samples=" + std::to_string(config.hdbscan_params.effective_min_samples()) +
                            ";metric=" + metric_name(config.hdbscan_params.metric);
        std::ofstream tree_out(config.output_dir / "condensed_tree.csv");
        tree_out << "parent,child,lambda_val,child_size\n";
        for (const auto& node : result.tree.nodes)
            tree_out << node.parent << ',' << node.child << ',' << format_double(node.lambda_val)
                     << ',' << node.child_size << '\n';
        std::ofstream stab_out(config.output_dir / "cluster_stability.csv");
        stab_out << "cluster,stability,selected\n";
        for (std::size_t i = 0; i < result.tree.cluster_labels.size(); ++i) {
            auto label = result.tree.cluster_labels[i];
            bool selected = std::find(result.tree.selected_clusters.begin(),
                                      result.tree.selected_clusters.end(),
                                      label) != result.tree.selected_clusters.end();
            stab_out << label << ',' << format_double(result.tree.cluster_stability[i]) << ','
                     << (selected ? 1 : 0) << '\n';
        }
    }
    assignment.outlier_scores = distance_to_center_outlier_scores(points, assignment.cluster_ids);
    write_assignment(assignment, config.output_dir / "assignment.csv");
    write_manifest(config, "discover", {config.tracks_path, config.embeddings_path});
    return 0;
}

int cmd_eval(const PipelineConfig& config) {
    ensure_output_dir(config);
    require_input(config.assignment_path, "assignment");
    require_input(config.annotations_path, "annotations");

    auto assignment = read_assignment(config.assignment_path);
    auto annotations = read_annotations(config.annotations_path);
    std::unordered_map<std::int64_t, std::string> gt_by_track;
    for (const auto& a : annotations) gt_by_track[a.track_id] = a.gt_label;

    // tracking errors are excluded from evaluation entirely
    ClusterAssignment kept;
    kept.method = assignment.method;
    std::vector<std::string> gt_strings;
    for (std::size_t i = 0; i < assignment.track_ids.size(); ++i) {
        auto it = gt_by_track.find(assignment.track_ids[i]);
        if (it == gt_by_track.end())
            throw DataError("eval: track " + std::to_string(assignment.track_ids[i]) +
                            " has no annotation");
        if (it->second == kTrackingErrorLabel) continue;
        kept.track_ids.push_back(assignment.track_ids[i]);
        kept.cluster_ids.push_back(assignment.cluster_ids[i]);
        kept.outlier_scores.push_back(assignment.outlier_scores[i]);
        gt_strings.push_back(it->second);
    }
    if (kept.track_ids.empty()) throw DataError("eval: no evaluable tracks after filtering");

    std::map<std::string, std::int64_t> class_ids;
    for (const auto& s : gt_strings) class_ids.try_emplace(s, class_ids.size());
    std::vector<std::int64_t> gt(gt_strings.size());
    for (std::size_t i = 0; i < gt_strings.size(); ++i) gt[i] = class_ids[gt_strings[i]];

    auto curve_all = ami_outlier_sweep(kept, gt, config.sweep_fractions);
    write_sweep_csv(curve_all, config.output_dir / "sweep_all.csv");

    auto subset = restrict_non_known(gt_strings, config.known_categories);
    ordered_json report;
    report["ami_all"] = curve_all.points.empty() ? 0.0 : curve_all.points.front().ami;
    if (curve_all.automatic_point) {
        report["auto_all"] = ordered_json{{"fraction", curve_all.automatic_point->fraction},
                                          {"ami", curve_all.automatic_point->ami}};
    }
    if (!subset.empty()) {
        ClusterAssignment sub;
        std::vector<std::int64_t> sub_gt;
        for (auto idx : subset) {
            sub.track_ids.push_back(kept.track_ids[idx]);
            sub.cluster_ids.push_back(kept.cluster_ids[idx]);
            sub.outlier_scores.push_back(kept.outlier_scores[idx]);
            sub_gt.push_back(gt[idx]);
        }
        auto curve_nk = ami_outlier_sweep(sub, sub_gt, config.sweep_fractions);
        write_sweep_csv(curve_nk, config.output_dir / "sweep_non_known.csv");
        report["ami_non_known"] = curve_nk.points.empty() ? 0.0 : curve_nk.points.front().ami;
        if (curve_nk.automatic_point)
            report["auto_non_known"] = ordered_json{{"fraction", curve_nk.automatic_point->fraction},
                                                    {"ami", curve_nk.automatic_point->ami}};
    } else {
        write_sweep_csv(SweepCurve{}, config.output_dir / "sweep_non_known.csv");
        report["ami_non_known"] = nullptr;
    }
    std::ofstream(config.output_dir / "ami_report.json") << report.dump(2) << '\n';
    write_manifest(config, "eval", {config.assignment_path, config.annotations_path});
    return 0;
}

int cmd_trainset(const PipelineConfig& config) {
    ensure_output_dir(config);
    require_input(config.tracks_path, "tracks");
    require_input(config.calibration_path, "calibration");

    auto collection = read_tracks(config.tracks_path);
    auto calib = read_calibration(config.calibration_path);

    if (config.merge_riders)
        collection = merge_rider_tracks(collection, config.rider_merge_distance).collection;

    std::unordered_map<std::int64_t, std::int64_t> cluster_of;
    if (config.trainset_mode == TrainsetMode::Discover) {
        if (config.assignment_path.empty())
            throw UsageError("trainset.mode=discover requires --assignment");
        require_input(config.assignment_path, "assignment");
        auto assignment = read_assignment(config.assignment_path);
        for (std::size_t i = 0; i < assignment.track_ids.size(); ++i)
            if (assignment.cluster_ids[i] != kNoise)
                cluster_of[assignment.track_ids[i]] = assignment.cluster_ids[i];
    }

    // per (sequence, frame): labeled boxes for positives, all boxes for negatives
    struct FrameData {
        std::vector<LabeledBox> labeled;
        std::vector<BBox> all_boxes;
    };
    std::map<std::pair<std::string, int>, FrameData> frames;
    for (const auto& track : collection.tracks) {
        for (const auto& el : track.elements) {
            auto& fd = frames[{track.sequence_id, el.frame}];
            fd.all_boxes.push_back(el.bbox);
            if (config.trainset_mode == TrainsetMode::Finetune) {
                if (track.label.is_known())
                    fd.labeled.push_back({track.track_id, el.bbox, PositiveLabel{track.label.category}});
            } else {
                auto it = cluster_of.find(track.track_id);
                if (it != cluster_of.end())
                    fd.labeled.push_back({track.track_id, el.bbox, PositiveLabel{it->second}});
            }
        }
    }

    auto anchors = generate_anchors(calib.intrinsics.image_w, calib.intrinsics.image_h,
                                    config.anchor_stride, config.anchor_scales, config.anchor_ratios);
    auto mask = free_space_mask(calib.intrinsics, calib.plane, nullptr, config.free_space);
    write_mask_pgm(mask, config.output_dir / "free_space_mask.pgm");

    std::vector<TrainingExample> positives, negatives;
    for (const auto& [key, fd] : frames) {
        auto pos = select_positive_anchors(anchors, fd.labeled, key.first, key.second,
                                           config.positive_iou_min);
        auto neg = select_negative_anchors(anchors, mask, fd.all_boxes, key.first, key.second,
                                           config.negative_free_fraction_min, config.negative_iou_max);
        positives.insert(positives.end(), pos.begin(), pos.end());
        negatives.insert(negatives.end(), neg.begin(), neg.end());
    }
    export_training_set(positives, negatives, config.trainset_mode,
                        config.output_dir / "training_set.ndjson");

    std::vector<std::filesystem::path> inputs{config.tracks_path, config.calibration_path};
    if (config.trainset_mode == TrainsetMode::Discover) inputs.push_back(config.assignment_path);
    write_manifest(config, "trainset", inputs);
    return 0;
}

int cmd_stats(const PipelineConfig& config, const std::filesystem::path& counts_path) {
    ensure_output_dir(config);
    MiningStats s;
    if (!counts_path.empty()) {
        require_input(counts_path, "counts");
        std::ifstream in(counts_path);
        ordered_json j;
        try {
            in >> j;
            MiningCounts c;
            c.frames = j.at("frames").get<std::int64_t>();
            c.duration_hours = j.value("duration_hours", 0.0);
            c.proposals_total = j.at("proposals_total").get<std::int64_t>();
            c.tracks_total = j.at("tracks_total").get<std::int64_t>();
            c.tracks_labeled = j.at("tracks_labeled").get<std::int64_t>();
            c.tracks_unknown = j.value("tracks_unknown", std::int64_t{0});
            c.tracking_errors = j.at("tracking_errors").get<std::int64_t>();
            s = mining_stats(c);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(counts_path.string() + ": malformed counts file: " + e.what());
        }
        std::ofstream(config.output_dir / "stats.json") << stats_to_json(s).dump(2) << '\n';
        print_stats(s);
        write_manifest(config, "stats", {counts_path});
        return 0;
    }
    require_input(config.tracks_path, "tracks");
    require_input(config.annotations_path, "annotations");
    auto collection = read_tracks(config.tracks_path);
    auto annotations = read_annotations(config.annotations_path);
    s = mining_stats(collection, annotations, config.frames_override, config.duration_hours,
                     config.proposals_total_override);
    std::ofstream(config.output_dir / "stats.json") << stats_to_json(s).dump(2) << '\n';
    print_stats(s);
    write_manifest(config, "stats", {config.tracks_path, config.annotations_path});
    return 0;
}

}  // namespace trackmine
