/// @file types.hpp
/// @brief Domain types shared across the music structure analysis pipeline.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace msa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised for invalid domain data (bad annotation, malformed grid, ...).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// One labeled time interval of a song. Intervals are half-open: [start, end).
struct Segment {
    double start = 0.0;
    double end = 0.0;
    std::string label;
};

/// Ordered, contiguous, non-overlapping labeled segments of one song.
/// Gaps up to kMaxGapSeconds are closed at construction by extending the
/// earlier segment; larger gaps are rejected.
class Annotation {
public:
    static constexpr double kMaxGapSeconds = 0.05;

    Annotation() = default;
    /// Sorts, validates and gap-closes the given segments.
    Annotation(std::vector<Segment> segments, std::string song_id);

    const std::vector<Segment>& segments() const { return segments_; }
    const std::string& song_id() const { return song_id_; }
    bool empty() const { return segments_.empty(); }
    double start_time() const;
    double end_time() const;

    /// Label of the segment containing `t` (half-open intervals; ties go to
    /// the following segment). Times outside the annotated span take the
    /// nearest segment's label; `outside` is set accordingly when non-null.
    const std::string& label_at(double t, bool* outside = nullptr) const;

private:
    std::vector<Segment> segments_;
    std::string song_id_;
};

enum class GridKind { Beat, Downbeat };

/// Strictly increasing beat or downbeat instants.
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(std::vector<double> instants, GridKind kind);

    const std::vector<double>& instants() const { return instants_; }
    GridKind kind() const { return kind_; }
    std::size_t num_intervals() const { return instants_.size() - 1; }

private:
    std::vector<double> instants_;
    GridKind kind_ = GridKind::Beat;
};

/// One windowed training example: an interval of the grid plus its label id.
struct LabeledExample {
    std::string song_id;
    int grid_index = 0;       // interval index into the grid
    double center_time = 0.0; // midpoint of the grid interval
    int label_id = 0;         // per-song id, assigned by first appearance
};

/// Frames-by-dims real feature matrix with per-frame timestamps.
struct FeatureMatrix {
    Matrix data;                     // frames x dims
    std::vector<double> frame_times; // seconds, one per row

    void validate() const;
};

/// N x D embedding rows with per-row timestamps. Rows are unit-norm when the
/// producing network had L2-normalization enabled.
struct EmbeddingMatrix {
    Matrix data;
    std::vector<double> frame_times;
};

/// Predicted boundaries (including 0 and song end) with one abstract integer
/// label per inter-boundary segment.
struct StructureEstimate {
    std::vector<double> boundaries;
    std::vector<int> labels;

    void validate() const;
    Annotation to_annotation(const std::string& song_id) const;
};

/// Frame labels at times k*frame_period in [0, duration); each frame takes
/// the label of the containing segment, frames past the last segment repeat
/// the last label. Output length is exactly ceil(duration / frame_period).
std::vector<int> annotation_to_frame_labels(const Annotation& ann,
                                            double frame_period,
                                            double duration);

struct ExampleSet {
    std::vector<LabeledExample> examples;
    std::vector<std::string> label_names; // label_id -> annotation label
    int outside_warnings = 0;             // centers outside the annotated span
};

/// One example per grid interval, labeled by the annotation at the interval
/// midpoint. Label ids are per-song, in order of first appearance.
ExampleSet examples_from_annotation(const Annotation& ann, const TimeGrid& grid);

} // namespace msa
