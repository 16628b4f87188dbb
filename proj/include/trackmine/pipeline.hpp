#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "trackmine/discovery.hpp"
#include "trackmine/tracker.hpp"
#include "trackmine/trainset.hpp"

namespace trackmine {

/// Flat key-value configuration driving all subcommands. Populated from a
/// config file first, then overridden by CLI flags (flags win).
struct PipelineConfig {
    std::filesystem::path proposals_path;
    std::filesystem::path embeddings_path;
    std::filesystem::path annotations_path;
    std::filesystem::path calibration_path;
    std::filesystem::path tracks_path;      // input for discover/eval/trainset
    std::filesystem::path assignment_path;  // input for eval/trainset(discover)
    std::filesystem::path output_dir;

    std::uint64_t seed = 1;
    int jobs = 1;

    TrackerParams tracker;
    bool merge_riders = false;
    double rider_merge_distance = 1.0;

    std::string method = "hdbscan";  // kmeans|hdbscan
    std::size_t kmeans_k = 0;        // 0 = unset
    HdbscanParams hdbscan_params;
    bool include_known = false;

    std::set<std::string> known_categories;
    std::vector<double> sweep_fractions = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

    int anchor_stride = 16;
    std::vector<double> anchor_scales = {32, 64, 128, 256};
    std::vector<double> anchor_ratios = {0.5, 1.0, 2.0};
    TrainsetMode trainset_mode = TrainsetMode::Finetune;
    double positive_iou_min = 0.5;
    double negative_free_fraction_min = 0.9;
    double negative_iou_max = 0.1;
    FreeSpaceParams free_space;

    double duration_hours = 0.0;
    std::int64_t frames_override = 0;           // 0 = derive from proposals
    std::int64_t proposals_total_override = 0;  // 0 = derive from proposals

    /// All settings as sorted key=value pairs (manifest snapshot).
    std::map<std::string, std::string> snapshot() const;

    /// Applies one key=value setting; unknown keys throw UsageError.
    void set(const std::string& key, const std::string& value);

    static PipelineConfig from_file(const std::filesystem::path& path);
};

struct Calibration {
    CameraIntrinsics intrinsics;
    GroundPlane plane;
};

Calibration read_calibration(const std::filesystem::path& path);
void write_calibration(const Calibration& calib, const std::filesystem::path& path);

/// Writes manifest.json next to the command outputs: config snapshot, seed,
/// and FNV-1a content hashes of every input file.
void write_manifest(const PipelineConfig& config, const std::string& command,
                    const std::vector<std::filesystem::path>& inputs);

// Subcommand entry points. Return the CLI exit code (0 success).
int cmd_build_tracks(const PipelineConfig& config);
int cmd_discover(const PipelineConfig& config);
int cmd_eval(const PipelineConfig& config);
int cmd_trainset(const PipelineConfig& config);
int cmd_stats(const PipelineConfig& config, const std::filesystem::path& counts_path);

}  // namespace trackmine
