#include "msa/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace msa {

Annotation::Annotation(std::vector<Segment> segments, std::string song_id)
    : segments_(std::move(segments)), song_id_(std::move(song_id)) {
    if (segments_.empty()) {
        throw DataError("annotation has no segments");
    }
    std::stable_sort(segments_.begin(), segments_.end(),
                     [](const Segment& a, const Segment& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        Segment& s = segments_[i];
        if (!(s.end > s.start)) {
            throw DataError("segment " + std::to_string(i) + " has end <= start");
        }
        if (s.label.empty()) {
            throw DataError("segment " + std::to_string(i) + " has empty label");
        }
        if (i > 0) {
            Segment& prev = segments_[i - 1];
            double gap = s.start - prev.end;
            if (gap > kMaxGapSeconds) {
                throw DataError("gap of " + std::to_string(gap) + " s before segment " +
                                std::to_string(i));
            }
            if (gap < -1e-9) {
                throw DataError("segments " + std::to_string(i - 1) + " and " +
                                std::to_string(i) + " overlap");
            }
            prev.end = s.start; // close sub-50ms gaps by extending the earlier segment
        }
    }
}

double Annotation::start_time() const {
    if (segments_.empty()) throw DataError("empty annotation");
    return segments_.front().start;
}

double Annotation::end_time() const {
    if (segments_.empty()) throw DataError("empty annotation");
    return segments_.back().end;
}

const std::string& Annotation::label_at(double t, bool* outside) const {
    if (segments_.empty()) throw DataError("empty annotation");
    if (outside) *outside = false;
    if (t < segments_.front().start) {
        if (outside) *outside = true;
        return segments_.front().label;
    }
    // Half-open [start, end): a time equal to a boundary belongs to the
    // following segment.
    for (const Segment& s : segments_) {
        if (t >= s.start && t < s.end) return s.label;
    }
    if (outside) *outside = true;
    return segments_.back().label;
}

TimeGrid::TimeGrid(std::vector<double> instants, GridKind kind)
    : instants_(std::move(instants)), kind_(kind) {
    if (instants_.size() < 2) {
        throw DataError("time grid needs at least 2 instants");
    }
    for (std::size_t i = 1; i < instants_.size(); ++i) {
        if (!(instants_[i] > instants_[i - 1])) {
            throw DataError("grid instants not strictly increasing at index " +
                            std::to_string(i));
        }
    }
}

void FeatureMatrix::validate() const {
    if (static_cast<std::size_t>(data.rows()) != frame_times.size()) {
        throw DataError("feature matrix rows do not match frame times");
    }
    if (!data.allFinite()) {
        throw DataError("feature matrix has non-finite entries");
    }
}

void StructureEstimate::validate() const {
    if (boundaries.size() < 2) {
        throw DataError("structure estimate needs at least 2 boundaries");
    }
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
        if (!(boundaries[i] > boundaries[i - 1])) {
            throw DataError("estimate boundaries not strictly increasing");
        }
    }
    if (labels.size() != boundaries.size() - 1) {
        throw DataError("estimate label count does not match segment count");
    }
}

Annotation StructureEstimate::to_annotation(const std::string& song_id) const {
    validate();
    std::vector<Segment> segs;
    segs.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        segs.push_back({boundaries[i], boundaries[i + 1], std::to_string(labels[i])});
    }
    return Annotation(std::move(segs), song_id);
}

std::vector<int> annotation_to_frame_labels(const Annotation& ann,
                                            double frame_period,
                                            double duration) {
    if (ann.empty()) throw DataError("empty annotation");
    if (!(frame_period > 0.0)) throw DataError("frame_period must be positive");
    if (!(duration > 0.0)) throw DataError("duration must be positive");

    std::map<std::string, int> ids;
    for (const Segment& s : ann.segments()) {
        ids.emplace(s.label, static_cast<int>(ids.size()));
    }
    auto n = static_cast<std::size_t>(std::ceil(duration / frame_period));
    std::vector<int> labels;
    labels.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        labels.push_back(ids.at(ann.label_at(static_cast<double>(k) * frame_period)));
    }
    return labels;
}

ExampleSet examples_from_annotation(const Annotation& ann, const TimeGrid& grid) {
    ExampleSet out;
    std::map<std::string, int> ids;
    const auto& t = grid.instants();
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        double center = 0.5 * (t[i] + t[i + 1]);
        bool outside = false;
        const std::string& label = ann.label_at(center, &outside);
        if (outside) out.outside_warnings++;
        auto [it, inserted] = ids.emplace(label, static_cast<int>(ids.size()));
        if (inserted) out.label_names.push_back(label);
        out.examples.push_back({ann.song_id(), static_cast<int>(i), center, it->second});
    }
    return out;
}

} // namespace msa
