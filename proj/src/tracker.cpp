#include "trackmine/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "trackmine/embedding.hpp"

namespace trackmine {

namespace {

struct ActiveTrack {
    std::int64_t local_id;
    std::vector<TrackElement> elements;
    int last_frame;
};

double cosine_similarity(std::span<const float> u, std::span<const float> v) {
    return 1.0 - embedding_distance(u, v, Metric::Cosine);
}

TrackElement to_element(const ProposalRecord& p) {
    return TrackElement{p.frame, p.bbox, p.embedding_index, p.centroid_3d};
}

}  // namespace

TrackCollection build_tracks_sequence(const std::string& sequence_id,
                                      std::span<const ProposalRecord> proposals,
                                      const TrackerParams& params,
                                      const EmbeddingMatrix* embeddings,
                                      std::int64_t id_base) {
    if (params.embedding_gate && embeddings == nullptr)
        throw UsageError("embedding_gate enabled but no embeddings provided");

    std::vector<ActiveTrack> active;
    std::vector<ActiveTrack> finished;
    std::int64_t next_local = 0;

    auto close_stale = [&](int current_frame) {
        std::vector<ActiveTrack> still;
        for (auto& t : active) {
            if (current_frame - t.last_frame > params.max_gap)
                finished.push_back(std::move(t));
            else
                still.push_back(std::move(t));
        }
        active = std::move(still);
    };

    std::size_t i = 0;
    while (i < proposals.size()) {
        int frame = proposals[i].frame;
        std::size_t begin = i;
        while (i < proposals.size() && proposals[i].frame == frame) ++i;
        std::span<const ProposalRecord> group = proposals.subspan(begin, i - begin);

        close_stale(frame);

        // candidate pairs at or above the gates, sorted by descending IoU
        struct Candidate {
            double iou;
            std::size_t track_idx;
            std::size_t prop_idx;
        };
        std::vector<Candidate> candidates;
        for (std::size_t t = 0; t < active.size(); ++t) {
            const BBox& last = active[t].elements.back().bbox;
            for (std::size_t p = 0; p < group.size(); ++p) {
                double ov = iou(last, group[p].bbox);
                if (ov < params.iou_gate) continue;
                if (params.embedding_gate) {
                    double sim = cosine_similarity(embeddings->row(active[t].elements.back().embedding_index),
                                                   embeddings->row(group[p].embedding_index));
                    if (sim < *params.embedding_gate) continue;
                }
                candidates.push_back({ov, t, p});
            }
        }
        std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
            if (a.iou != b.iou) return a.iou > b.iou;
            if (active[a.track_idx].local_id != active[b.track_idx].local_id)
                return active[a.track_idx].local_id < active[b.track_idx].local_id;
            return a.prop_idx < b.prop_idx;
        });

        std::vector<bool> track_matched(active.size(), false);
        std::vector<bool> prop_matched(group.size(), false);
        for (const auto& c : candidates) {
            if (track_matched[c.track_idx] || prop_matched[c.prop_idx]) continue;
            track_matched[c.track_idx] = true;
            prop_matched[c.prop_idx] = true;
            active[c.track_idx].elements.push_back(to_element(group[c.prop_idx]));
            active[c.track_idx].last_frame = frame;
        }
        for (std::size_t p = 0; p < group.size(); ++p) {
            if (prop_matched[p]) continue;
            active.push_back({next_local++, {to_element(group[p])}, frame});
        }
    }
    for (auto& t : active) finished.push_back(std::move(t));

    std::sort(finished.begin(), finished.end(),
              [](const ActiveTrack& a, const ActiveTrack& b) { return a.local_id < b.local_id; });

    TrackCollection out;
    for (auto& t : finished) {
        if (static_cast<int>(t.elements.size()) < params.min_length) continue;
        Track track;
        track.track_id = id_base + static_cast<std::int64_t>(out.tracks.size());
        track.sequence_id = sequence_id;
        track.elements = std::move(t.elements);
        track.label = TrackLabel::unknown();
        track.source = kGreedyIouSource;
        out.tracks.push_back(std::move(track));
    }
    return out;
}

TrackCollection build_tracks(const ProposalGroups& proposals, const TrackerParams& params,
                             const EmbeddingMatrix* embeddings, int num_threads) {
    // per-sequence spans, processed in sorted sequence order
    struct SeqRange {
        std::string id;
        std::size_t begin, end;
    };
    std::vector<SeqRange> sequences;
    for (const auto& [key, range] : proposals.groups) {
        if (!sequences.empty() && sequences.back().id == key.first)
            sequences.back().end = range.second;
        else
            sequences.push_back({key.first, range.first, range.second});
    }
    std::sort(sequences.begin(), sequences.end(),
              [](const SeqRange& a, const SeqRange& b) { return a.id < b.id; });

    std::vector<TrackCollection> per_seq(sequences.size());
    auto worker = [&](std::size_t s) {
        std::span<const ProposalRecord> span{proposals.records.data() + sequences[s].begin,
                                             sequences[s].end - sequences[s].begin};
        per_seq[s] = build_tracks_sequence(sequences[s].id, span, params, embeddings, 0);
    };
    if (num_threads <= 1 || sequences.size() <= 1) {
        for (std::size_t s = 0; s < sequences.size(); ++s) worker(s);
    } else {
        std::vector<std::thread> pool;
        std::size_t stride = static_cast<std::size_t>(num_threads);
        for (std::size_t t = 0; t < stride && t < sequences.size(); ++t)
            pool.emplace_back([&, t] {
                for (std::size_t s = t; s < sequences.size(); s += stride) worker(s);
            });
        for (auto& th : pool) th.join();
    }

    TrackCollection out;
    std::int64_t next_id = 0;
    for (auto& coll : per_seq) {
        for (auto& t : coll.tracks) {
            t.track_id = next_id++;
            out.tracks.push_back(std::move(t));
        }
    }
    return out;
}

TrackLabel label_track(std::span<const std::map<std::string, double>> element_scores, double theta) {
    if (element_scores.empty()) return TrackLabel::unknown();
    std::map<std::string, int> votes;  // argmax category per confident element
    std::size_t confident = 0;
    for (const auto& scores : element_scores) {
        std::string best_cat;
        double best = -1.0;
        for (const auto& [cat, score] : scores) {
            if (score > best) {  // map order makes lexicographically-first win ties
                best = score;
                best_cat = cat;
            }
        }
        if (best >= theta) {
            ++confident;
            ++votes[best_cat];
        }
    }
    if (confident * 2 < element_scores.size()) return TrackLabel::unknown();
    std::string majority;
    int best_count = 0;
    for (const auto& [cat, count] : votes) {
        if (count > best_count) {  // ties keep the lexicographically-first category
            best_count = count;
            majority = cat;
        }
    }
    if (majority.empty()) return TrackLabel::unknown();
    return TrackLabel::known(majority);
}

namespace {

// Median 3D centroid distance over overlapping frames; nullopt when any
// overlapping element lacks a centroid.
std::optional<double> median_overlap_distance(const Track& a, const Track& b, int* overlap_count) {
    std::vector<double> dists;
    std::size_t ia = 0, ib = 0;
    while (ia < a.elements.size() && ib < b.elements.size()) {
        int fa = a.elements[ia].frame, fb = b.elements[ib].frame;
        if (fa < fb) {
            ++ia;
        } else if (fb < fa) {
            ++ib;
        } else {
            if (overlap_count) ++*overlap_count;
            const auto& ca = a.elements[ia].centroid_3d;
            const auto& cb = b.elements[ib].centroid_3d;
            if (!ca || !cb) return std::nullopt;
            double dx = (*ca)[0] - (*cb)[0], dy = (*ca)[1] - (*cb)[1], dz = (*ca)[2] - (*cb)[2];
            dists.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
            ++ia;
            ++ib;
        }
    }
    if (dists.empty()) return std::nullopt;
    std::sort(dists.begin(), dists.end());
    std::size_t n = dists.size();
    return n % 2 == 1 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
}

Track merge_pair(const Track& person, const Track& bicycle, std::int64_t new_id) {
    Track merged;
    merged.track_id = new_id;
    merged.sequence_id = person.sequence_id;
    merged.label = TrackLabel::known("cyclist");
    merged.source = person.source + "+rider_merge";
    std::size_t ia = 0, ib = 0;
    while (ia < person.elements.size() || ib < bicycle.elements.size()) {
        if (ib >= bicycle.elements.size() ||
            (ia < person.elements.size() && person.elements[ia].frame < bicycle.elements[ib].frame)) {
            merged.elements.push_back(person.elements[ia++]);
        } else if (ia >= person.elements.size() ||
                   bicycle.elements[ib].frame < person.elements[ia].frame) {
            merged.elements.push_back(bicycle.elements[ib++]);
        } else {
            TrackElement el = person.elements[ia];  // person's embedding stands for the pair
            el.bbox = union_rect(person.elements[ia].bbox, bicycle.elements[ib].bbox);
            merged.elements.push_back(std::move(el));
            ++ia;
            ++ib;
        }
    }
    return merged;
}

}  // namespace

MergeResult merge_rider_tracks(const TrackCollection& collection, double max_distance) {
    MergeResult result;
    std::vector<bool> consumed(collection.tracks.size(), false);
    std::vector<Track> merged_tracks;
    std::int64_t max_id = -1;
    for (const auto& t : collection.tracks) max_id = std::max(max_id, t.track_id);
    std::int64_t next_id = max_id + 1;

    for (std::size_t i = 0; i < collection.tracks.size(); ++i) {
        const Track& person = collection.tracks[i];
        if (consumed[i] || !(person.label == TrackLabel::known("person"))) continue;
        std::size_t best_j = collection.tracks.size();
        double best_dist = max_distance;
        for (std::size_t j = 0; j < collection.tracks.size(); ++j) {
            const Track& bike = collection.tracks[j];
            if (consumed[j] || !(bike.label == TrackLabel::known("bicycle"))) continue;
            if (bike.sequence_id != person.sequence_id) continue;
            int overlap = 0;
            auto dist = median_overlap_distance(person, bike, &overlap);
            if (!dist) {
                if (overlap > 0) ++result.skipped_missing_centroids;
                continue;
            }
            if (*dist < best_dist) {
                best_dist = *dist;
                best_j = j;
            }
        }
        if (best_j < collection.tracks.size()) {
            consumed[i] = true;
            consumed[best_j] = true;
            merged_tracks.push_back(merge_pair(person, collection.tracks[best_j], next_id++));
            ++result.merged_pairs;
        }
    }

    for (std::size_t i = 0; i < collection.tracks.size(); ++i)
        if (!consumed[i]) result.collection.tracks.push_back(collection.tracks[i]);
    for (auto& t : merged_tracks) result.collection.tracks.push_back(std::move(t));
    return result;
}

}  // namespace trackmine
