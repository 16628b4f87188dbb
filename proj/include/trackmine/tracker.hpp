#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trackmine/io.hpp"
#include "trackmine/types.hpp"

namespace trackmine {

struct TrackerParams {
    double iou_gate = 0.3;
    // Minimum cosine similarity between a proposal's embedding and the
    // track's last embedding; disabled when unset.
    std::optional<double> embedding_gate;
    int max_gap = 2;       // max frame delta between consecutive track elements
    int min_length = 5;    // minimum surviving element count
    double confidence_threshold = 0.3;  // theta for label_track
};

inline constexpr const char* kGreedyIouSource = "greedy_iou_v1";

/// Greedy per-frame association for a single sequence: candidate
/// (track, proposal) pairs are matched in descending IoU order, accepted at
/// IoU >= iou_gate (plus the embedding gate when enabled). Unmatched
/// proposals open new tracks; tracks idle for more than max_gap frames are
/// closed; tracks shorter than min_length are discarded. Ties break on
/// (lower track_id, lower proposal index). track_ids start at id_base.
TrackCollection build_tracks_sequence(const std::string& sequence_id,
                                      std::span<const ProposalRecord> proposals,
                                      const TrackerParams& params,
                                      const EmbeddingMatrix* embeddings,
                                      std::int64_t id_base = 0);

/// All sequences in a proposal file, processed in sorted sequence order with
/// globally sequential track ids. num_threads > 1 parallelizes across
/// sequences; output is identical regardless of thread count.
TrackCollection build_tracks(const ProposalGroups& proposals, const TrackerParams& params,
                             const EmbeddingMatrix* embeddings = nullptr, int num_threads = 1);

/// An element is confident when its max class score >= theta. If at least
/// half the elements are confident and the confident elements have a
/// plurality category (ties lexicographic), the track is Known(category);
/// otherwise Unknown.
TrackLabel label_track(std::span<const std::map<std::string, double>> element_scores, double theta);

struct MergeResult {
    TrackCollection collection;
    int merged_pairs = 0;
    int skipped_missing_centroids = 0;
};

/// Merges (Known(person), Known(bicycle)) pairs overlapping in >= 1 frame
/// whose median 3D centroid distance over the overlapping frames is below
/// max_distance into a single Known(cyclist) track. The merged per-frame box
/// is the union rectangle on shared frames; frames covered by only one
/// member keep that member's box. Pairs lacking centroids on overlapping
/// frames are skipped and counted.
MergeResult merge_rider_tracks(const TrackCollection& collection, double max_distance = 1.0);

}  // namespace trackmine
