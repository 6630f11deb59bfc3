#include "msa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace msa {

namespace {

double f_measure(double p, double r) {
    return (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
}

// Kuhn's augmenting-path maximum bipartite matching.
struct Matcher {
    const std::vector<std::vector<int>>& adj;
    std::vector<int> match_right;
    std::vector<char> used;

    explicit Matcher(const std::vector<std::vector<int>>& a, std::size_t n_right)
        : adj(a), match_right(n_right, -1) {}

    bool augment(int u) {
        for (int v : adj[u]) {
            if (used[v]) continue;
            used[v] = 1;
            if (match_right[v] < 0 || augment(match_right[v])) {
                match_right[v] = u;
                return true;
            }
        }
        return false;
    }

    int solve() {
        int matched = 0;
        for (std::size_t u = 0; u < adj.size(); ++u) {
            used.assign(match_right.size(), 0);
            if (augment(static_cast<int>(u))) ++matched;
        }
        return matched;
    }
};

} // namespace

PrecisionRecallF hit_rate_f(const std::vector<double>& ref,
                            const std::vector<double>& est, double window,
                            bool trim) {
    if (ref.empty() || est.empty()) throw DataError("empty boundary list");
    std::vector<double> r = ref, e = est;
    if (trim) {
        if (r.size() > 2) r = std::vector<double>(r.begin() + 1, r.end() - 1);
        else r.clear();
        if (e.size() > 2) e = std::vector<double>(e.begin() + 1, e.end() - 1);
        else e.clear();
    }
    PrecisionRecallF out;
    if (r.empty() || e.empty()) return out;
    std::vector<std::vector<int>> adj(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t j = 0; j < e.size(); ++j) {
            if (std::abs(r[i] - e[j]) <= window) adj[i].push_back(static_cast<int>(j));
        }
    }
    Matcher m(adj, e.size());
    const int matched = m.solve();
    out.precision = static_cast<double>(matched) / static_cast<double>(e.size());
    out.recall = static_cast<double>(matched) / static_cast<double>(r.size());
    out.f = f_measure(out.precision, out.recall);
    return out;
}

PrecisionRecallF pairwise_f(const std::vector<int>& ref_labels,
                            const std::vector<int>& est_labels) {
    if (ref_labels.size() != est_labels.size()) {
        throw DataError("frame label length mismatch");
    }
    if (ref_labels.size() < 2) throw DataError("need at least 2 frames");

    auto choose2 = [](long n) { return n * (n - 1) / 2; };
    std::map<int, long> ref_counts, est_counts;
    std::map<std::pair<int, int>, long> joint;
    for (std::size_t i = 0; i < ref_labels.size(); ++i) {
        ref_counts[ref_labels[i]]++;
        est_counts[est_labels[i]]++;
        joint[{ref_labels[i], est_labels[i]}]++;
    }
    long a = 0, e = 0, both = 0;
    for (const auto& [k, c] : ref_counts) a += choose2(c);
    for (const auto& [k, c] : est_counts) e += choose2(c);
    for (const auto& [k, c] : joint) both += choose2(c);

    PrecisionRecallF out;
    out.precision = e > 0 ? static_cast<double>(both) / static_cast<double>(e) : 0.0;
    out.recall = a > 0 ? static_cast<double>(both) / static_cast<double>(a) : 0.0;
    out.f = f_measure(out.precision, out.recall);
    return out;
}

EntropyScores entropy_scores(const std::vector<int>& ref_labels,
                             const std::vector<int>& est_labels) {
    if (ref_labels.size() != est_labels.size()) {
        throw DataError("frame label length mismatch");
    }
    const double n = static_cast<double>(ref_labels.size());
    std::map<int, long> ref_counts, est_counts;
    std::map<std::pair<int, int>, long> joint;
    for (std::size_t i = 0; i < ref_labels.size(); ++i) {
        ref_counts[ref_labels[i]]++;
        est_counts[est_labels[i]]++;
        joint[{ref_labels[i], est_labels[i]}]++;
    }

    // H(B|A) over the joint histogram, in bits
    auto cond_entropy = [&](bool est_given_ref) {
        double h = 0.0;
        const auto& cond = est_given_ref ? ref_counts : est_counts;
        for (const auto& [pair, c] : joint) {
            const int a = est_given_ref ? pair.first : pair.second;
            const double p_joint = static_cast<double>(c) / n;
            const double p_cond =
                static_cast<double>(c) / static_cast<double>(cond.at(a));
            if (p_cond > 0.0) h -= p_joint * std::log2(p_cond);
        }
        return h;
    };

    EntropyScores out;
    out.over = est_counts.size() <= 1
                   ? 1.0
                   : 1.0 - cond_entropy(true) /
                               std::log2(static_cast<double>(est_counts.size()));
    out.under = ref_counts.size() <= 1
                    ? 1.0
                    : 1.0 - cond_entropy(false) /
                                std::log2(static_cast<double>(ref_counts.size()));
    out.over = std::clamp(out.over, 0.0, 1.0);
    out.under = std::clamp(out.under, 0.0, 1.0);
    out.f = f_measure(out.over, out.under);
    return out;
}

double summary_score(const SegmentMetrics& m, const std::array<double, 4>& w) {
    return w[0] * m.hr05f + w[1] * m.hr3f + w[2] * m.pwf + w[3] * m.sf;
}

SegmentMetrics evaluate_segmentation(const Annotation& ref, const Annotation& est,
                                     const MetricsConfig& cfg) {
    if (ref.empty() || est.empty()) throw DataError("empty annotation");
    std::vector<double> ref_bounds, est_bounds;
    ref_bounds.push_back(ref.segments().front().start);
    for (const Segment& s : ref.segments()) ref_bounds.push_back(s.end);
    est_bounds.push_back(est.segments().front().start);
    for (const Segment& s : est.segments()) est_bounds.push_back(s.end);

    SegmentMetrics m;
    m.hr05f = hit_rate_f(ref_bounds, est_bounds, 0.5, cfg.trim_endpoints).f;
    m.hr3f = hit_rate_f(ref_bounds, est_bounds, 3.0, cfg.trim_endpoints).f;

    // frame labels over the reference span; the estimate is extended or
    // truncated to the same frames
    const double start = ref.start_time();
    const double span = ref.end_time() - start;
    const auto n = static_cast<std::size_t>(std::ceil(span / cfg.frame_period));
    auto frame_labels = [&](const Annotation& ann) {
        std::map<std::string, int> ids;
        std::vector<int> out;
        out.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::string& l =
                ann.label_at(start + static_cast<double>(k) * cfg.frame_period);
            auto [it, _] = ids.emplace(l, static_cast<int>(ids.size()));
            out.push_back(it->second);
        }
        return out;
    };
    const auto ref_frames = frame_labels(ref);
    const auto est_frames = frame_labels(est);
    m.pwf = pairwise_f(ref_frames, est_frames).f;
    m.sf = entropy_scores(ref_frames, est_frames).f;
    m.summary = summary_score(m, cfg.weights);
    return m;
}

} // namespace msa
