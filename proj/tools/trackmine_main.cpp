#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trackmine/pipeline.hpp"

namespace {

using trackmine::PipelineConfig;

// Flag values collected as (config key, raw value) pairs and applied after
// the config file, so flags always win.
struct Overrides {
    std::vector<std::pair<std::string, std::string>> entries;

    void add(const std::string& key, std::string value) { entries.emplace_back(key, std::move(value)); }
};

void add_common_flags(CLI::App* cmd, std::string& config_file, Overrides& ov) {
    cmd->add_option("--config", config_file, "flat key=value config file");
    cmd->add_option_function<std::string>("--seed", [&ov](const std::string& v) { ov.add("seed", v); },
                                          "master RNG seed (64-bit unsigned)");
    cmd->add_option_function<std::string>("--jobs", [&ov](const std::string& v) { ov.add("jobs", v); },
                                          "worker pool size");
    cmd->add_option_function<std::string>(
        "--output-dir", [&ov](const std::string& v) { ov.add("output_dir", v); }, "output directory");
}

void add_path_flag(CLI::App* cmd, Overrides& ov, const std::string& flag, const std::string& key,
                   const std::string& help) {
    cmd->add_option_function<std::string>(flag, [&ov, key](const std::string& v) { ov.add(key, v); },
                                          help);
}

PipelineConfig build_config(const std::string& config_file, const Overrides& ov) {
    PipelineConfig config;
    if (!config_file.empty()) config = PipelineConfig::from_file(config_file);
    for (const auto& [key, value] : ov.entries) config.set(key, value);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trackmine: mine object tracks, discover categories, evaluate, export training sets"};
    app.require_subcommand(1);

    std::string config_file;
    Overrides ov;
    std::string counts_path;

    auto* build = app.add_subcommand("build-tracks", "associate proposals into labeled tracks");
    add_common_flags(build, config_file, ov);
    add_path_flag(build, ov, "--proposals", "proposals", "proposal NDJSON file");
    add_path_flag(build, ov, "--embeddings", "embeddings", "binary embedding matrix");
    add_path_flag(build, ov, "--annotations", "annotations", "ground-truth annotations NDJSON");
    add_path_flag(build, ov, "--iou-gate", "tracker.iou_gate", "association IoU gate");
    add_path_flag(build, ov, "--embedding-gate", "tracker.embedding_gate",
                  "min cosine similarity gate (or 'none')");
    add_path_flag(build, ov, "--max-gap", "tracker.max_gap", "max frame gap inside a track");
    add_path_flag(build, ov, "--min-length", "tracker.min_length", "min surviving track length");
    add_path_flag(build, ov, "--confidence-threshold", "tracker.confidence_threshold",
                  "class-score confidence threshold");
    add_path_flag(build, ov, "--duration", "duration_hours", "dataset duration in hours");

    auto* discover = app.add_subcommand("discover", "cluster unknown-track embeddings");
    add_common_flags(discover, config_file, ov);
    add_path_flag(discover, ov, "--tracks", "tracks", "tracks NDJSON file");
    add_path_flag(discover, ov, "--embeddings", "embeddings", "binary embedding matrix");
    add_path_flag(discover, ov, "--method", "discovery.method", "kmeans|hdbscan");
    add_path_flag(discover, ov, "--k", "discovery.k", "kmeans cluster count");
    add_path_flag(discover, ov, "--min-cluster-size", "discovery.min_cluster_size",
                  "HDBSCAN min cluster size");
    add_path_flag(discover, ov, "--min-samples", "discovery.min_samples", "HDBSCAN min samples");
    add_path_flag(discover, ov, "--metric", "discovery.metric", "euclidean|cosine");
    discover->add_flag_callback("--include-known", [&ov] { ov.add("discovery.include_known", "true"); },
                                "cluster all tracks, not only unknown ones");

    auto* eval = app.add_subcommand("eval", "AMI and outlier-fraction sweeps");
    add_common_flags(eval, config_file, ov);
    add_path_flag(eval, ov, "--assignment", "assignment", "cluster assignment CSV");
    add_path_flag(eval, ov, "--annotations", "annotations", "ground-truth annotations NDJSON");
    add_path_flag(eval, ov, "--known-categories", "eval.known_categories",
                  "comma-separated known (e.g. COCO) category names");
    add_path_flag(eval, ov, "--fractions", "eval.sweep_fractions", "comma-separated sweep fractions");

    auto* trainset = app.add_subcommand("trainset", "export auto-labeled training examples");
    add_common_flags(trainset, config_file, ov);
    add_path_flag(trainset, ov, "--tracks", "tracks", "tracks NDJSON file");
    add_path_flag(trainset, ov, "--assignment", "assignment", "cluster assignment CSV");
    add_path_flag(trainset, ov, "--calibration", "calibration", "camera calibration JSON");
    add_path_flag(trainset, ov, "--mode", "trainset.mode", "finetune|discover");
    trainset->add_flag_callback("--merge-riders", [&ov] { ov.add("merge_riders", "true"); },
                                "merge co-located person+bicycle tracks into cyclist");

    auto* stats = app.add_subcommand("stats", "mining statistics report");
    add_common_flags(stats, config_file, ov);
    stats->add_option("--counts", counts_path, "JSON file of raw mining counts");
    add_path_flag(stats, ov, "--tracks", "tracks", "tracks NDJSON file");
    add_path_flag(stats, ov, "--annotations", "annotations", "ground-truth annotations NDJSON");
    add_path_flag(stats, ov, "--frames", "frames", "total frame count");
    add_path_flag(stats, ov, "--proposals-total", "proposals_total", "total proposal count");
    add_path_flag(stats, ov, "--duration", "duration_hours", "dataset duration in hours");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        auto config = build_config(config_file, ov);
        if (build->parsed()) return trackmine::cmd_build_tracks(config);
        if (discover->parsed()) return trackmine::cmd_discover(config);
        if (eval->parsed()) return trackmine::cmd_eval(config);
        if (trainset->parsed()) return trackmine::cmd_trainset(config);
        if (stats->parsed()) return trackmine::cmd_stats(config, counts_path);
    } catch (const trackmine::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const trackmine::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
