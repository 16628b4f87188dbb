#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trackmine/discovery.hpp"
#include "trackmine/types.hpp"

namespace trackmine {

inline constexpr int kSchemaVersion = 1;
inline constexpr char kEmbeddingMagic[8] = {'T', 'M', 'E', 'M', 'B', '\0', '\0', '\1'};

/// Proposals grouped by (sequence_id, frame), original order preserved.
struct ProposalGroups {
    std::vector<ProposalRecord> records;
    // (sequence_id, frame) -> [begin, end) into records; iteration order is
    // file order (frames non-decreasing within each sequence).
    std::vector<std::pair<std::pair<std::string, int>, std::pair<std::size_t, std::size_t>>> groups;
};

/// NDJSON, schema_version header on line 1, one record per line.
/// Validates embedding_index bounds when embedding_count is given.
ProposalGroups read_proposals(const std::filesystem::path& path,
                              std::optional<std::uint32_t> embedding_count = std::nullopt);
void write_proposals(const std::vector<ProposalRecord>& records, const std::filesystem::path& path);

/// Binary embeddings: 8-byte magic "TMEMB\0\0\1", u32 count, u32 dim,
/// count*dim little-endian float32, row-major. Truncation is detected from
/// the file size before the payload is allocated; NaN entries are rejected.
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);

TrackCollection read_tracks(const std::filesystem::path& path);
void write_tracks(const TrackCollection& collection, const std::filesystem::path& path);

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::vector<AnnotationRecord>& records,
                       const std::filesystem::path& path);

/// CSV with header: track_id, cluster_id (-1 = NOISE), outlier_score.
ClusterAssignment read_assignment(const std::filesystem::path& path);
void write_assignment(const ClusterAssignment& assignment, const std::filesystem::path& path);

/// Shortest round-trip-exact decimal rendering of a double; "inf" sentinel
/// kept readable in CSV output.
std::string format_double(double v);

}  // namespace trackmine
