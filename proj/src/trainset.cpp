#include "trackmine/trainset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "trackmine/errors.hpp"

namespace trackmine {

using ordered_json = nlohmann::ordered_json;

std::vector<Anchor> generate_anchors(int image_w, int image_h, int stride,
                                     std::span<const double> scales,
                                     std::span<const double> ratios) {
    if (stride < 1) throw UsageError("generate_anchors: stride must be >= 1");
    if (scales.empty() || ratios.empty())
        throw UsageError("generate_anchors: scales and ratios must be non-empty");
    std::vector<Anchor> anchors;
    const int grid_rows = image_h / stride;
    const int grid_cols = image_w / stride;
    for (int row = 0; row < grid_rows; ++row) {
        for (int col = 0; col < grid_cols; ++col) {
            double cx = col * stride + stride / 2.0;
            double cy = row * stride + stride / 2.0;
            for (std::size_t s = 0; s < scales.size(); ++s) {
                for (std::size_t r = 0; r < ratios.size(); ++r) {
                    // area scale^2, aspect w/h = ratio
                    double w = scales[s] * std::sqrt(ratios[r]);
                    double h = scales[s] / std::sqrt(ratios[r]);
                    double x0 = std::max(0.0, cx - w / 2.0);
                    double y0 = std::max(0.0, cy - h / 2.0);
                    double x1 = std::min(static_cast<double>(image_w), cx + w / 2.0);
                    double y1 = std::min(static_cast<double>(image_h), cy + h / 2.0);
                    if (x1 - x0 < 1.0 || y1 - y0 < 1.0) continue;
                    anchors.push_back({BBox{x0, y0, x1 - x0, y1 - y0}, row, col,
                                       static_cast<int>(s), static_cast<int>(r)});
                }
            }
        }
    }
    return anchors;
}

std::vector<TrainingExample> select_positive_anchors(std::span<const Anchor> anchors,
                                                     std::span<const LabeledBox> boxes,
                                                     const std::string& sequence_id, int frame,
                                                     double iou_min) {
    std::vector<TrainingExample> out;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        double best_iou = -1.0;
        const LabeledBox* best = nullptr;
        for (const auto& box : boxes) {
            double ov = iou(anchors[a].bbox, box.bbox);
            if (ov < iou_min) continue;
            if (ov > best_iou || (ov == best_iou && best && box.track_id < best->track_id)) {
                best_iou = ov;
                best = &box;
            }
        }
        if (!best) continue;
        TrainingExample ex;
        ex.sequence_id = sequence_id;
        ex.frame = frame;
        ex.bbox = anchors[a].bbox;
        ex.kind = TrainingExample::Kind::Positive;
        ex.label = best->label;
        ex.source_track_id = best->track_id;
        ex.anchor_index = static_cast<std::int64_t>(a);
        out.push_back(std::move(ex));
    }
    return out;
}

FreeSpaceMask free_space_mask(const CameraIntrinsics& k, const GroundPlane& plane,
                              const DepthMap* depth, const FreeSpaceParams& params) {
    if (!plane.valid()) throw DataError("free_space_mask: ground-plane normal is not unit length");
    if (depth && (depth->width != k.image_w || depth->height != k.image_h))
        throw DataError("free_space_mask: depth map dimensions do not match the image");
    FreeSpaceMask mask;
    mask.width = k.image_w;
    mask.height = k.image_h;
    mask.data.assign(static_cast<std::size_t>(k.image_w) * k.image_h, 0);
    for (int y = 0; y < k.image_h; ++y) {
        for (int x = 0; x < k.image_w; ++x) {
            bool free_px = false;
            double u = x + 0.5, v = y + 0.5;  // pixel center
            if (depth) {
                double d = depth->at(x, y);
                if (d > 0.0) {
                    double h = height_above_plane(backproject(u, v, d, k), plane);
                    free_px = h <= params.ground_eps || h >= params.max_height;
                }
            } else {
                // ray r(t) = t * dir with dir_z = 1, so t is metric depth;
                // height along the ray is linear in t
                double dx = (u - k.cx) / k.fx, dy = (v - k.cy) / k.fy;
                double slope = plane.normal[0] * dx + plane.normal[1] * dy + plane.normal[2];
                if (slope != 0.0) {
                    double t_ground = -plane.offset / slope;
                    if (t_ground >= params.z_min && t_ground <= params.z_max) free_px = true;
                }
                if (!free_px) {
                    double h_near = slope * params.z_min + plane.offset;
                    double h_far = slope * params.z_max + plane.offset;
                    if (std::min(h_near, h_far) > params.max_height) free_px = true;
                }
            }
            if (free_px) mask.data[static_cast<std::size_t>(y) * k.image_w + x] = 1;
        }
    }
    return mask;
}

namespace {

// Summed-area table over the mask for O(1) free-pixel counts per box.
class FreeCount {
public:
    explicit FreeCount(const FreeSpaceMask& mask) : w_(mask.width), h_(mask.height) {
        sat_.assign(static_cast<std::size_t>(w_ + 1) * (h_ + 1), 0);
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x)
                at(x + 1, y + 1) = (mask.at(x, y) ? 1 : 0) + at(x, y + 1) + at(x + 1, y) - at(x, y);
    }

    // pixel (px, py) counts as inside when its center lies in the box
    std::pair<std::int64_t, std::int64_t> count(const BBox& b) const {
        int x0 = std::clamp(static_cast<int>(std::ceil(b.x - 0.5)), 0, w_);
        int y0 = std::clamp(static_cast<int>(std::ceil(b.y - 0.5)), 0, h_);
        int x1 = std::clamp(static_cast<int>(std::ceil(b.x + b.w - 0.5)), 0, w_);
        int y1 = std::clamp(static_cast<int>(std::ceil(b.y + b.h - 0.5)), 0, h_);
        if (x1 <= x0 || y1 <= y0) return {0, 0};
        std::int64_t free = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
        std::int64_t total = static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
        return {free, total};
    }

private:
    std::int64_t& at(int x, int y) { return sat_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }
    std::int64_t at(int x, int y) const { return sat_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }

    int w_, h_;
    std::vector<std::int64_t> sat_;
};

}  // namespace

std::vector<TrainingExample> select_negative_anchors(std::span<const Anchor> anchors,
                                                     const FreeSpaceMask& mask,
                                                     std::span<const BBox> track_boxes,
                                                     const std::string& sequence_id, int frame,
                                                     double free_fraction_min, double iou_max) {
    FreeCount counter(mask);
    std::vector<TrainingExample> out;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        auto [free, total] = counter.count(anchors[a].bbox);
        if (total == 0) continue;
        double fraction = static_cast<double>(free) / static_cast<double>(total);
        if (fraction < free_fraction_min) continue;
        bool overlaps = false;
        for (const auto& box : track_boxes) {
            if (iou(anchors[a].bbox, box) >= iou_max) {
                overlaps = true;
                break;
            }
        }
        if (overlaps) continue;
        TrainingExample ex;
        ex.sequence_id = sequence_id;
        ex.frame = frame;
        ex.bbox = anchors[a].bbox;
        ex.kind = TrainingExample::Kind::Negative;
        ex.anchor_index = static_cast<std::int64_t>(a);
        out.push_back(std::move(ex));
    }
    return out;
}

void export_training_set(std::span<const TrainingExample> positives,
                         std::span<const TrainingExample> negatives, TrainsetMode mode,
                         const std::filesystem::path& path) {
    std::vector<const TrainingExample*> all;
    all.reserve(positives.size() + negatives.size());
    for (const auto& ex : positives) {
        if (!ex.label) throw DataError("export_training_set: positive example without label");
        bool has_cluster = std::holds_alternative<std::int64_t>(*ex.label);
        if (mode == TrainsetMode::Discover && !has_cluster)
            throw DataError("export_training_set: discover mode requires cluster_id labels");
        if (mode == TrainsetMode::Finetune && has_cluster)
            throw DataError("export_training_set: finetune mode requires category labels");
        all.push_back(&ex);
    }
    for (const auto& ex : negatives) all.push_back(&ex);
    std::sort(all.begin(), all.end(), [](const TrainingExample* a, const TrainingExample* b) {
        if (a->sequence_id != b->sequence_id) return a->sequence_id < b->sequence_id;
        if (a->frame != b->frame) return a->frame < b->frame;
        if (a->anchor_index != b->anchor_index) return a->anchor_index < b->anchor_index;
        return a->kind == TrainingExample::Kind::Positive && b->kind == TrainingExample::Kind::Negative;
    });

    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    std::map<std::string, std::int64_t> per_label;
    for (const auto* ex : all) {
        ordered_json j;
        j["sequence_id"] = ex->sequence_id;
        j["frame"] = ex->frame;
        j["bbox"] = ordered_json::array({ex->bbox.x, ex->bbox.y, ex->bbox.w, ex->bbox.h});
        if (ex->kind == TrainingExample::Kind::Positive) {
            j["label"] = "positive";
            std::string key;
            if (std::holds_alternative<std::int64_t>(*ex->label)) {
                j["cluster_id"] = std::get<std::int64_t>(*ex->label);
                key = "cluster_" + std::to_string(std::get<std::int64_t>(*ex->label));
            } else {
                j["category"] = std::get<std::string>(*ex->label);
                key = std::get<std::string>(*ex->label);
            }
            j["source_track_id"] = ex->source_track_id;
            ++per_label[key];
        } else {
            j["label"] = "negative";
            j["source_track_id"] = nullptr;
        }
        j["anchor_index"] = ex->anchor_index;
        out << j.dump() << '\n';
    }
    ordered_json meta;
    meta["meta"] = true;
    meta["mode"] = mode == TrainsetMode::Finetune ? "finetune" : "discover";
    meta["positives"] = static_cast<std::int64_t>(positives.size());
    meta["negatives"] = static_cast<std::int64_t>(negatives.size());
    meta["per_label"] = per_label;
    out << meta.dump() << '\n';
}

void write_mask_pgm(const FreeSpaceMask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
    for (auto v : mask.data) out.put(v ? static_cast<char>(255) : 0);
}

}  // namespace trackmine
