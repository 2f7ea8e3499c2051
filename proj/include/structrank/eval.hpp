#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "structrank/reranker.hpp"
#include "structrank/util.hpp"

// Ranking metrics and the report tables. Percentages are reported to two
// decimals, half up.

namespace structrank {

struct QueryResult {
    std::string query_id;
    std::vector<std::string> ranked_docs;
    std::string gold;
};

// Percentage of queries whose gold document appears in the top k.
inline double precision_at_k(const std::vector<QueryResult>& results, std::size_t k) {
    if (results.empty()) throw DomainError("precision_at_k: empty result set");
    if (k < 1) throw DomainError("precision_at_k: k must be >= 1");
    std::size_t hits = 0;
    for (const auto& r : results) {
        const std::size_t limit = std::min(k, r.ranked_docs.size());
        for (std::size_t i = 0; i < limit; ++i)
            if (r.ranked_docs[i] == r.gold) {
                ++hits;
                break;
            }
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(results.size());
}

// Mean reciprocal rank over the retrieved list; queries whose gold document
// is absent contribute zero.
inline double mrr(const std::vector<QueryResult>& results) {
    if (results.empty()) throw DomainError("mrr: empty result set");
    double sum = 0.0;
    for (const auto& r : results) {
        for (std::size_t i = 0; i < r.ranked_docs.size(); ++i)
            if (r.ranked_docs[i] == r.gold) {
                sum += 1.0 / static_cast<double>(i + 1);
                break;
            }
    }
    return 100.0 * (sum / static_cast<double>(results.size()));
}

// --- Result tables -------------------------------------------------------------

struct ResultCell {
    std::string model;
    std::string split;
    std::string source;
    std::string metric;
    double value = 0.0;
};

// Flat cell list with first-seen label order preserved, so the rendered
// tables always come out in insertion order and reruns are byte-identical.
class ResultTable {
public:
    void add(std::string model, std::string split, std::string source, std::string metric,
             double value) {
        note(models_, model);
        note(splits_, split);
        note(sources_, source);
        note(metrics_, metric);
        cells_.push_back({std::move(model), std::move(split), std::move(source), std::move(metric), value});
    }

    void merge(const ResultTable& other) {
        for (const auto& cell : other.cells())
            add(cell.model, cell.split, cell.source, cell.metric, cell.value);
    }

    const std::vector<ResultCell>& cells() const { return cells_; }
    bool empty() const { return cells_.empty(); }

    std::optional<double> find(const std::string& model, const std::string& split,
                               const std::string& source, const std::string& metric) const {
        for (const auto& c : cells_)
            if (c.model == model && c.split == split && c.source == source && c.metric == metric)
                return c.value;
        return std::nullopt;
    }

    void write_tsv(std::ostream& out, const std::vector<std::string>& metadata = {}) const {
        for (const auto& line : metadata) out << "# " << line << '\n';
        out << "model\tsplit\tsource\tmetric\tvalue\n";
        for (const auto& c : cells_)
            out << c.model << '\t' << c.split << '\t' << c.source << '\t' << c.metric << '\t'
                << num::fmt_percent2(c.value) << '\n';
    }

    // Aligned table: one row per model, one column per (split, source, metric).
    void write_text(std::ostream& out, const std::vector<std::string>& metadata = {}) const {
        for (const auto& line : metadata) out << "# " << line << '\n';

        struct Column {
            std::string split, source, metric, header;
        };
        std::vector<Column> columns;
        for (const auto& split : splits_)
            for (const auto& source : sources_)
                for (const auto& metric : metrics_) {
                    bool any = false;
                    for (const auto& c : cells_)
                        if (c.split == split && c.source == source && c.metric == metric) any = true;
                    if (any) columns.push_back({split, source, metric, split + "." + source + "." + metric});
                }

        std::vector<std::vector<std::string>> grid;
        std::vector<std::string> header{"model"};
        for (const auto& col : columns) header.push_back(col.header);
        grid.push_back(header);
        for (const auto& model : models_) {
            std::vector<std::string> row{model};
            for (const auto& col : columns) {
                auto v = find(model, col.split, col.source, col.metric);
                row.push_back(v ? num::fmt_percent2(*v) : "-");
            }
            grid.push_back(row);
        }

        std::vector<std::size_t> widths(header.size(), 0);
        for (const auto& row : grid)
            for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
        for (const auto& row : grid) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out << "  ";
                out << row[i];
                for (std::size_t pad = row[i].size(); pad < widths[i]; ++pad) out << ' ';
            }
            out << '\n';
        }
    }

private:
    static void note(std::vector<std::string>& order, const std::string& label) {
        if (std::find(order.begin(), order.end(), label) == order.end()) order.push_back(label);
    }

    std::vector<ResultCell> cells_;
    std::vector<std::string> models_, splits_, sources_, metrics_;
};

// --- Rankings derived from score bundles -----------------------------------------

inline std::vector<std::string> baseline_list(const ScoreBundle& bundle) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < bundle.real_count; ++i) out.push_back(bundle.rows[i].doc_id);
    return out;
}

// Retrieved documents reordered by one structure-score column, ties keeping
// the baseline order.
inline std::vector<std::string> struct_ranked_list(const ScoreBundle& bundle, double BundleRow::*column) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < bundle.real_count; ++i) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return bundle.rows[a].*column > bundle.rows[b].*column;
    });
    std::vector<std::string> out;
    out.reserve(order.size());
    for (auto i : order) out.push_back(bundle.rows[i].doc_id);
    return out;
}

inline bool baseline_top1_correct(const LabeledBundle& lb) {
    return lb.bundle.real_count > 0 && lb.bundle.rows[0].doc_id == lb.gold;
}

// Queries the baseline got wrong at rank 1, reranked by each structure
// comparator alone. The baseline row's P@1 is zero on this subset by
// construction.
inline ResultTable failed_query_analysis(const std::vector<LabeledBundle>& bundles,
                                         const std::string& split, const std::string& baseline_label) {
    ResultTable table;
    std::vector<const LabeledBundle*> failed;
    for (const auto& lb : bundles)
        if (!baseline_top1_correct(lb)) failed.push_back(&lb);
    if (failed.empty()) return table;

    auto add_row = [&](const std::string& model, auto make_list) {
        std::vector<QueryResult> results;
        results.reserve(failed.size());
        for (const auto* lb : failed) results.push_back({lb->query_id, make_list(lb->bundle), lb->gold});
        table.add(model, split, "All", "P@1", precision_at_k(results, 1));
        table.add(model, split, "All", "MRR", mrr(results));
    };
    add_row(baseline_label, [](const ScoreBundle& b) { return baseline_list(b); });
    add_row("Struct_w", [](const ScoreBundle& b) { return struct_ranked_list(b, &BundleRow::w); });
    add_row("Struct_l", [](const ScoreBundle& b) { return struct_ranked_list(b, &BundleRow::l); });
    add_row("Struct_m", [](const ScoreBundle& b) { return struct_ranked_list(b, &BundleRow::m); });
    return table;
}

} // namespace structrank
