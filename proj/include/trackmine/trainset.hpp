#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "trackmine/geometry.hpp"
#include "trackmine/types.hpp"

namespace trackmine {

struct Anchor {
    BBox bbox;  // clipped to image bounds
    int row = 0;
    int col = 0;
    int scale_index = 0;
    int ratio_index = 0;
};

/// Positive label: a known category name (finetune) or a cluster id
/// (discover).
using PositiveLabel = std::variant<std::string, std::int64_t>;

struct TrainingExample {
    std::string sequence_id;
    int frame = 0;
    BBox bbox;
    enum class Kind { Positive, Negative } kind = Kind::Negative;
    std::optional<PositiveLabel> label;       // set iff Positive
    std::int64_t source_track_id = -1;        // -1 = NONE (negatives)
    std::int64_t anchor_index = -1;
};

/// Image-sized binary mask; true = assumed object-free.
struct FreeSpaceMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // row-major, 1 = free

    bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
};

struct FreeSpaceParams {
    double ground_eps = 0.2;   // meters; |height| at or below this is ground
    double max_height = 2.5;   // meters; at or above this is assumed free
    double z_min = 1.0;        // depthless mode ray range
    double z_max = 60.0;
};

/// Dense anchor grid: one anchor per (cell, scale, ratio), centered on the
/// cell, area scale^2 and aspect w/h = ratio before clipping. Anchors that
/// clip below 1px in either dimension are dropped. Ordering is row-major,
/// then scale, then ratio.
std::vector<Anchor> generate_anchors(int image_w, int image_h, int stride,
                                     std::span<const double> scales,
                                     std::span<const double> ratios);

struct LabeledBox {
    std::int64_t track_id = 0;
    BBox bbox;
    PositiveLabel label;
};

/// Every anchor with IoU >= iou_min against some labeled track box emits one
/// Positive carrying the highest-IoU box's label (ties -> lower track_id).
std::vector<TrainingExample> select_positive_anchors(std::span<const Anchor> anchors,
                                                     std::span<const LabeledBox> boxes,
                                                     const std::string& sequence_id, int frame,
                                                     double iou_min = 0.5);

/// Per-pixel depth map in meters; entries <= 0 are invalid.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// With depth: a pixel is free iff its backprojected height above the plane
/// is <= ground_eps or >= max_height. Without depth: free iff the pixel ray
/// hits the plane at a depth within [z_min, z_max], or the ray's minimum
/// height over that range exceeds max_height.
FreeSpaceMask free_space_mask(const CameraIntrinsics& k, const GroundPlane& plane,
                              const DepthMap* depth = nullptr,
                              const FreeSpaceParams& params = {});

/// An anchor is Negative iff the free-pixel fraction inside it is at least
/// free_fraction_min and its IoU with every track box is below iou_max.
std::vector<TrainingExample> select_negative_anchors(std::span<const Anchor> anchors,
                                                     const FreeSpaceMask& mask,
                                                     std::span<const BBox> track_boxes,
                                                     const std::string& sequence_id, int frame,
                                                     double free_fraction_min = 0.9,
                                                     double iou_max = 0.1);

enum class TrainsetMode { Finetune, Discover };

/// NDJSON records in (sequence, frame, anchor index) order, followed by one
/// trailing metadata line with per-label counts. Finetune mode requires
/// category labels on every positive; discover mode requires cluster ids.
void export_training_set(std::span<const TrainingExample> positives,
                         std::span<const TrainingExample> negatives, TrainsetMode mode,
                         const std::filesystem::path& path);

/// P5 binary PGM, 255 = free, for visual inspection.
void write_mask_pgm(const FreeSpaceMask& mask, const std::filesystem::path& path);

}  // namespace trackmine
