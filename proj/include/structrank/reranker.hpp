#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "structrank/bm25.hpp"
#include "structrank/classifier.hpp"
#include "structrank/corpus.hpp"
#include "structrank/util.hpp"

// Per-query score bundle: for each document of the baseline top-k, in
// baseline rank order, the baseline score e and the three structure-matching
// scores w (word), l (lemma), m (embedding). Bundles are zero-padded to
// exactly k rows; padding rows have an empty doc id and never win a rerank.

namespace structrank {

struct BundleRow {
    std::string doc_id; // empty = padding
    double e = 0.0;
    double w = 0.0;
    double l = 0.0;
    double m = 0.0;
};

struct ScoreBundle {
    std::size_t k = 0;
    std::vector<BundleRow> rows; // size == k
    std::size_t real_count = 0;
};

inline ScoreBundle make_bundle(const RankedList& baseline, const std::vector<double>& word_scores,
                               const std::vector<double>& lemma_scores,
                               const std::vector<double>& embedding_scores, std::size_t k) {
    if (k < 1) throw DomainError("make_bundle: k must be >= 1");
    if (word_scores.size() != baseline.size() || lemma_scores.size() != baseline.size() ||
        embedding_scores.size() != baseline.size())
        throw DomainError("make_bundle: score column arity mismatch");

    ScoreBundle bundle;
    bundle.k = k;
    bundle.real_count = std::min(baseline.size(), k);
    bundle.rows.resize(k);
    for (std::size_t i = 0; i < bundle.real_count; ++i) {
        BundleRow& row = bundle.rows[i];
        row.doc_id = baseline[i].doc_id;
        row.e = baseline[i].score;
        row.w = word_scores[i];
        row.l = lemma_scores[i];
        row.m = embedding_scores[i];
        if (!std::isfinite(row.e) || !std::isfinite(row.w) || !std::isfinite(row.l) ||
            !std::isfinite(row.m))
            throw DomainError("make_bundle: non-finite score for " + row.doc_id);
    }
    return bundle;
}

struct NormalizedColumns {
    std::vector<double> e, w, l, m; // each of length k, values in [0, 1]
};

namespace detail {

// Min-max over the k rows; a constant column maps to all zeros.
inline std::vector<double> minmax_column(const ScoreBundle& bundle, double BundleRow::*member) {
    std::vector<double> out(bundle.k, 0.0);
    double lo = bundle.rows[0].*member, hi = bundle.rows[0].*member;
    for (const auto& row : bundle.rows) {
        lo = std::min(lo, row.*member);
        hi = std::max(hi, row.*member);
    }
    if (hi > lo)
        for (std::size_t i = 0; i < bundle.k; ++i) out[i] = (bundle.rows[i].*member - lo) / (hi - lo);
    return out;
}

} // namespace detail

inline NormalizedColumns normalize_columns(const ScoreBundle& bundle) {
    if (bundle.rows.size() != bundle.k || bundle.k == 0)
        throw DomainError("normalize_columns: malformed bundle");
    return {detail::minmax_column(bundle, &BundleRow::e), detail::minmax_column(bundle, &BundleRow::w),
            detail::minmax_column(bundle, &BundleRow::l), detail::minmax_column(bundle, &BundleRow::m)};
}

// Classifier input: the four min-max normalized columns concatenated
// column-major (k baseline values, then k word, k lemma, k embedding).
inline std::vector<double> assemble_features(const ScoreBundle& bundle) {
    auto cols = normalize_columns(bundle);
    std::vector<double> features;
    features.reserve(4 * bundle.k);
    features.insert(features.end(), cols.e.begin(), cols.e.end());
    features.insert(features.end(), cols.w.begin(), cols.w.end());
    features.insert(features.end(), cols.l.begin(), cols.l.end());
    features.insert(features.end(), cols.m.begin(), cols.m.end());
    return features;
}

struct WeightVector {
    double e = 1.0;
    double w = 1.0;
    double l = 1.0;
    double m = 1.0;

    void validate() const {
        for (double v : {e, w, l, m})
            if (!(v >= 0.0) || !(v <= 1.0)) throw DomainError("rerank weights must lie in [0, 1]");
        if (e == 0.0 && w == 0.0 && l == 0.0 && m == 0.0)
            throw DomainError("at least one rerank weight must be positive");
    }

    bool operator==(const WeightVector&) const = default;
};

namespace detail {

inline std::vector<double> weighted_sums(const ScoreBundle& bundle, const NormalizedColumns& cols,
                                         const WeightVector& weights, bool raw_scores) {
    std::vector<double> sums(bundle.k, 0.0);
    for (std::size_t i = 0; i < bundle.k; ++i) {
        if (raw_scores) {
            const auto& row = bundle.rows[i];
            sums[i] = weights.e * row.e + weights.w * row.w + weights.l * row.l + weights.m * row.m;
        } else {
            sums[i] = weights.e * cols.e[i] + weights.w * cols.w[i] + weights.l * cols.l[i] +
                      weights.m * cols.m[i];
        }
    }
    return sums;
}

} // namespace detail

// Real rows reordered by weighted score, ties resolved in favor of the better
// baseline rank. Weighted sums use the normalized columns unless raw_scores.
inline std::vector<std::string> rerank_list(const ScoreBundle& bundle, const WeightVector& weights,
                                            bool raw_scores = false) {
    auto cols = normalize_columns(bundle);
    auto sums = detail::weighted_sums(bundle, cols, weights, raw_scores);
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < bundle.real_count; ++i) order.push_back(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sums[a] > sums[b]; });
    std::vector<std::string> out;
    out.reserve(order.size());
    for (auto i : order) out.push_back(bundle.rows[i].doc_id);
    return out;
}

// The document with the maximal weighted score; empty when nothing was
// retrieved.
inline std::string rerank(const ScoreBundle& bundle, const WeightVector& weights,
                          bool raw_scores = false) {
    if (bundle.real_count == 0) return {};
    auto cols = normalize_columns(bundle);
    auto sums = detail::weighted_sums(bundle, cols, weights, raw_scores);
    std::size_t best = 0;
    for (std::size_t i = 1; i < bundle.real_count; ++i)
        if (sums[i] > sums[best]) best = i;
    return bundle.rows[best].doc_id;
}

// Accept the baseline top-1 when the classifier is confident enough,
// otherwise fall back to the weighted rerank.
inline std::string predict_and_rerank(const ScoreBundle& bundle, const AcceptClassifier& classifier,
                                      const WeightVector& weights, double threshold = 0.5,
                                      bool raw_scores = false) {
    if (bundle.real_count == 0) return {};
    if (classifier.predict(assemble_features(bundle)) >= threshold) return bundle.rows[0].doc_id;
    return rerank(bundle, weights, raw_scores);
}

inline std::vector<std::string> predict_and_rerank_list(const ScoreBundle& bundle,
                                                        const AcceptClassifier& classifier,
                                                        const WeightVector& weights,
                                                        double threshold = 0.5,
                                                        bool raw_scores = false) {
    std::vector<std::string> baseline_order;
    for (std::size_t i = 0; i < bundle.real_count; ++i) baseline_order.push_back(bundle.rows[i].doc_id);
    if (bundle.real_count == 0) return baseline_order;
    if (classifier.predict(assemble_features(bundle)) >= threshold) return baseline_order;
    return rerank_list(bundle, weights, raw_scores);
}

// --- Grid search over the weight simplex ----------------------------------------

struct LabeledBundle {
    ScoreBundle bundle;
    std::string gold;
    std::string query_id;
    QuerySource source = QuerySource::Summary;
};

// Exhaustive search over {0, step, ..., 1}^4 minus the all-zero tuple,
// scoring each tuple by rerank P@1 on the development bundles; ties fall to
// the higher MRR, then to the lexicographically smallest tuple.
inline WeightVector grid_search_weights(const std::vector<LabeledBundle>& dev, double grid_step,
                                        bool raw_scores = false) {
    if (dev.empty()) throw DomainError("grid_search_weights: empty development set");
    if (!(grid_step > 0.0) || grid_step > 1.0)
        throw DomainError("grid_search_weights: step must be in (0, 1]");
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / grid_step));
    if (steps < 1 || std::abs(static_cast<double>(steps) * grid_step - 1.0) > 1e-9)
        throw DomainError("grid_search_weights: step must divide 1 evenly");

    struct PreparedBundle {
        NormalizedColumns cols;
        const ScoreBundle* bundle;
        std::ptrdiff_t gold_row; // -1 when the gold doc was not retrieved
    };
    std::vector<PreparedBundle> prepared;
    prepared.reserve(dev.size());
    for (const auto& lb : dev) {
        PreparedBundle pb{normalize_columns(lb.bundle), &lb.bundle, -1};
        for (std::size_t i = 0; i < lb.bundle.real_count; ++i)
            if (lb.bundle.rows[i].doc_id == lb.gold) {
                pb.gold_row = static_cast<std::ptrdiff_t>(i);
                break;
            }
        prepared.push_back(std::move(pb));
    }

    WeightVector best{};
    long long best_hits = -1;
    double best_mrr = -1.0;
    std::vector<double> sums;
    for (std::size_t ie = 0; ie <= steps; ++ie)
        for (std::size_t iw = 0; iw <= steps; ++iw)
            for (std::size_t il = 0; il <= steps; ++il)
                for (std::size_t im = 0; im <= steps; ++im) {
                    if (ie == 0 && iw == 0 && il == 0 && im == 0) continue;
                    const WeightVector cand{static_cast<double>(ie) / static_cast<double>(steps),
                                            static_cast<double>(iw) / static_cast<double>(steps),
                                            static_cast<double>(il) / static_cast<double>(steps),
                                            static_cast<double>(im) / static_cast<double>(steps)};
                    long long hits = 0;
                    double mrr_sum = 0.0;
                    for (const auto& pb : prepared) {
                        const auto& bundle = *pb.bundle;
                        if (bundle.real_count == 0) continue;
                        sums = detail::weighted_sums(bundle, pb.cols, cand, raw_scores);
                        std::size_t top = 0;
                        for (std::size_t i = 1; i < bundle.real_count; ++i)
                            if (sums[i] > sums[top]) top = i;
                        if (pb.gold_row >= 0) {
                            const auto g = static_cast<std::size_t>(pb.gold_row);
                            if (top == g) ++hits;
                            std::size_t rank = 1;
                            for (std::size_t i = 0; i < bundle.real_count; ++i) {
                                if (i == g) continue;
                                if (sums[i] > sums[g] || (sums[i] == sums[g] && i < g)) ++rank;
                            }
                            mrr_sum += 1.0 / static_cast<double>(rank);
                        }
                    }
                    if (hits > best_hits || (hits == best_hits && mrr_sum > best_mrr)) {
                        best_hits = hits;
                        best_mrr = mrr_sum;
                        best = cand;
                    }
                }
    return best;
}

// --- Weight vector persistence ---------------------------------------------------

inline void save_weights(const WeightVector& weights, std::ostream& out,
                         const std::vector<std::string>& metadata = {}) {
    out << "structrank.weights\tv1\n";
    for (const auto& line : metadata) out << "# " << line << '\n';
    out << "lambda\t" << num::fmt_double(weights.e) << '\t' << num::fmt_double(weights.w) << '\t'
        << num::fmt_double(weights.l) << '\t' << num::fmt_double(weights.m) << '\n';
    out << "end\n";
}

inline WeightVector load_weights(std::istream& in, const std::string& filename = "<weights>") {
    std::string line;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            return true;
        }
        return false;
    };
    if (!next_line() || line != "structrank.weights\tv1")
        throw FormatError(filename + ": not a structrank.weights v1 file");
    if (!next_line()) throw FormatError(filename + ": truncated");
    auto fields = str::split(line, '\t');
    if (fields.size() != 5 || fields[0] != "lambda")
        throw FormatError(filename + ": expected lambda line");
    WeightVector weights{num::parse_double(fields[1], "lambda_e"), num::parse_double(fields[2], "lambda_w"),
                         num::parse_double(fields[3], "lambda_l"), num::parse_double(fields[4], "lambda_m")};
    weights.validate();
    return weights;
}

} // namespace structrank
