#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trackmine/geometry.hpp"

namespace trackmine {

/// One per-frame candidate box from the proposal generator.
struct ProposalRecord {
    std::string sequence_id;
    int frame = 0;
    BBox bbox;
    double objectness = 0.0;
    std::map<std::string, double> class_scores;  // sparse: category -> score
    std::uint32_t embedding_index = 0;
    std::optional<Vec3> centroid_3d;
};

/// count x dim row-major float32 matrix backing all crop embeddings.
struct EmbeddingMatrix {
    std::uint32_t count = 0;
    std::uint32_t dim = 0;
    std::vector<float> data;

    std::span<const float> row(std::uint32_t i) const {
        return {data.data() + static_cast<std::size_t>(i) * dim, dim};
    }
};

struct TrackLabel {
    enum class Kind { Known, Unknown };
    Kind kind = Kind::Unknown;
    std::string category;  // set iff kind == Known

    static TrackLabel known(std::string cat) { return {Kind::Known, std::move(cat)}; }
    static TrackLabel unknown() { return {Kind::Unknown, {}}; }
    bool is_known() const { return kind == Kind::Known; }
    bool operator==(const TrackLabel&) const = default;
};

struct TrackElement {
    int frame = 0;
    BBox bbox;
    std::uint32_t embedding_index = 0;
    std::optional<Vec3> centroid_3d;
};

/// A time-ordered chain of proposals in one sequence.
struct Track {
    std::int64_t track_id = 0;
    std::string sequence_id;
    std::vector<TrackElement> elements;  // frames strictly increasing
    TrackLabel label;
    std::string source;  // provenance tag of the association scheme
};

struct TrackCollection {
    std::vector<Track> tracks;
};

/// Ground-truth label for one mined track.
struct AnnotationRecord {
    std::int64_t track_id = 0;
    std::string gt_label;  // category name | "unknown_valid" | "tracking_error"
};

inline constexpr const char* kTrackingErrorLabel = "tracking_error";
inline constexpr const char* kUnknownValidLabel = "unknown_valid";

}  // namespace trackmine
