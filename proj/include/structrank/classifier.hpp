#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "structrank/util.hpp"

// Binary classifier deciding whether the baseline's top-ranked document
// should stand: a feed-forward network with one sigmoid hidden layer of 15
// units and a sigmoid output, trained by full-batch gradient descent on
// binary cross-entropy. Training is bit-reproducible from the seed.

namespace structrank {

struct ClassifierHyperparams {
    double learning_rate = 1.0;
    int epochs = 500;
    std::uint64_t seed = 1;
};

struct LabeledFeatures {
    std::vector<double> features;
    bool label = false;
};

class AcceptClassifier {
public:
    static constexpr int kDefaultHidden = 15;

    AcceptClassifier(int input_dim, int hidden_dim, ClassifierHyperparams hyper)
        : input_dim_(input_dim), hidden_dim_(hidden_dim), hyper_(hyper) {
        if (input_dim_ < 1 || hidden_dim_ < 1)
            throw DomainError("AcceptClassifier: dimensions must be positive");
        w1_.assign(static_cast<std::size_t>(hidden_dim_) * input_dim_, 0.0);
        b1_.assign(static_cast<std::size_t>(hidden_dim_), 0.0);
        w2_.assign(static_cast<std::size_t>(hidden_dim_), 0.0);
        b2_ = 0.0;
        std::mt19937_64 gen(hyper_.seed);
        const double r1 = 1.0 / std::sqrt(static_cast<double>(input_dim_));
        for (auto& w : w1_) w = rng::uniform_range(gen, -r1, r1);
        const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim_));
        for (auto& w : w2_) w = rng::uniform_range(gen, -r2, r2);
    }

    int input_dim() const { return input_dim_; }
    int hidden_dim() const { return hidden_dim_; }
    const ClassifierHyperparams& hyperparams() const { return hyper_; }

    double predict(const std::vector<double>& features) const {
        std::vector<double> hidden;
        return forward(features, hidden);
    }

    // Mean binary cross-entropy, computed from the pre-sigmoid output for
    // stability at saturated units.
    double loss(const std::vector<LabeledFeatures>& batch) const {
        if (batch.empty()) throw DomainError("loss: empty batch");
        double total = 0.0;
        std::vector<double> hidden;
        for (const auto& ex : batch) {
            const double z = output_logit(ex.features, hidden);
            const double y = ex.label ? 1.0 : 0.0;
            total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        }
        return total / static_cast<double>(batch.size());
    }

    // Gradient of loss() with respect to the flat parameter vector.
    std::vector<double> loss_gradient(const std::vector<LabeledFeatures>& batch) const {
        if (batch.empty()) throw DomainError("loss_gradient: empty batch");
        std::vector<double> grad(parameter_count(), 0.0);
        const double inv_n = 1.0 / static_cast<double>(batch.size());
        std::vector<double> hidden;
        for (const auto& ex : batch) {
            if (static_cast<int>(ex.features.size()) != input_dim_)
                throw DomainError("loss_gradient: feature dimension mismatch");
            const double z = output_logit(ex.features, hidden);
            const double p = sigmoid(z);
            const double dz = (p - (ex.label ? 1.0 : 0.0)) * inv_n;

            double* gw1 = grad.data();
            double* gb1 = gw1 + w1_.size();
            double* gw2 = gb1 + b1_.size();
            double* gb2 = gw2 + w2_.size();
            for (int h = 0; h < hidden_dim_; ++h) {
                const double ah = hidden[static_cast<std::size_t>(h)];
                gw2[h] += dz * ah;
                const double dh = dz * w2_[static_cast<std::size_t>(h)] * ah * (1.0 - ah);
                gb1[h] += dh;
                const double* x = ex.features.data();
                double* row = gw1 + static_cast<std::size_t>(h) * input_dim_;
                for (int i = 0; i < input_dim_; ++i) row[i] += dh * x[i];
            }
            *gb2 += dz;
        }
        return grad;
    }

    std::size_t parameter_count() const { return w1_.size() + b1_.size() + w2_.size() + 1; }

    std::vector<double> parameters() const {
        std::vector<double> flat;
        flat.reserve(parameter_count());
        flat.insert(flat.end(), w1_.begin(), w1_.end());
        flat.insert(flat.end(), b1_.begin(), b1_.end());
        flat.insert(flat.end(), w2_.begin(), w2_.end());
        flat.push_back(b2_);
        return flat;
    }

    void set_parameters(const std::vector<double>& flat) {
        if (flat.size() != parameter_count())
            throw DomainError("set_parameters: parameter count mismatch");
        std::size_t off = 0;
        std::copy_n(flat.begin() + off, w1_.size(), w1_.begin());
        off += w1_.size();
        std::copy_n(flat.begin() + off, b1_.size(), b1_.begin());
        off += b1_.size();
        std::copy_n(flat.begin() + off, w2_.size(), w2_.begin());
        off += w2_.size();
        b2_ = flat[off];
    }

    void gradient_step(const std::vector<LabeledFeatures>& batch) {
        auto grad = loss_gradient(batch);
        auto flat = parameters();
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= hyper_.learning_rate * grad[i];
        set_parameters(flat);
    }

private:
    static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

    double output_logit(const std::vector<double>& features, std::vector<double>& hidden) const {
        if (static_cast<int>(features.size()) != input_dim_)
            throw DomainError("predict: feature dimension mismatch");
        hidden.assign(static_cast<std::size_t>(hidden_dim_), 0.0);
        for (int h = 0; h < hidden_dim_; ++h) {
            double z = b1_[static_cast<std::size_t>(h)];
            const double* row = w1_.data() + static_cast<std::size_t>(h) * input_dim_;
            for (int i = 0; i < input_dim_; ++i) z += row[i] * features[static_cast<std::size_t>(i)];
            hidden[static_cast<std::size_t>(h)] = sigmoid(z);
        }
        double z = b2_;
        for (int h = 0; h < hidden_dim_; ++h) z += w2_[static_cast<std::size_t>(h)] * hidden[static_cast<std::size_t>(h)];
        return z;
    }

    double forward(const std::vector<double>& features, std::vector<double>& hidden) const {
        return sigmoid(output_logit(features, hidden));
    }

    int input_dim_;
    int hidden_dim_;
    ClassifierHyperparams hyper_;
    std::vector<double> w1_; // hidden x input, row-major
    std::vector<double> b1_;
    std::vector<double> w2_;
    double b2_;

    friend void save_classifier(const AcceptClassifier&, std::ostream&, const std::vector<std::string>&);
    friend AcceptClassifier load_classifier(std::istream&, const std::string&);
};

inline AcceptClassifier train_accept_classifier(const std::vector<LabeledFeatures>& train_set,
                                                ClassifierHyperparams hyper,
                                                int hidden_dim = AcceptClassifier::kDefaultHidden) {
    if (train_set.empty()) throw DomainError("train_accept_classifier: empty training set");
    bool has_pos = false, has_neg = false;
    for (const auto& ex : train_set) (ex.label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw DomainError("train_accept_classifier: training set must contain both labels");

    AcceptClassifier clf(static_cast<int>(train_set.front().features.size()), hidden_dim, hyper);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) clf.gradient_step(train_set);
    return clf;
}

// --- Persistence ------------------------------------------------------------
//
//   structrank.ffnn<TAB>v1
//   dims<TAB>input<TAB>hidden<TAB>1
//   w1 / b1 / w2 / b2 lines, row-major, round-trip formatted
//   hyper<TAB>lr<TAB>epochs<TAB>seed

inline void save_classifier(const AcceptClassifier& clf, std::ostream& out,
                            const std::vector<std::string>& metadata = {}) {
    out << "structrank.ffnn\tv1\n";
    for (const auto& line : metadata) out << "# " << line << '\n';
    out << "dims\t" << clf.input_dim_ << '\t' << clf.hidden_dim_ << "\t1\n";
    auto write_row = [&](const char* tag, const double* values, std::size_t count) {
        out << tag;
        for (std::size_t i = 0; i < count; ++i) out << '\t' << num::fmt_double(values[i]);
        out << '\n';
    };
    for (int h = 0; h < clf.hidden_dim_; ++h)
        write_row("w1", clf.w1_.data() + static_cast<std::size_t>(h) * clf.input_dim_,
                  static_cast<std::size_t>(clf.input_dim_));
    write_row("b1", clf.b1_.data(), clf.b1_.size());
    write_row("w2", clf.w2_.data(), clf.w2_.size());
    write_row("b2", &clf.b2_, 1);
    out << "hyper\t" << num::fmt_double(clf.hyper_.learning_rate) << '\t' << clf.hyper_.epochs
        << '\t' << clf.hyper_.seed << '\n';
    out << "end\n";
}

inline AcceptClassifier load_classifier(std::istream& in, const std::string& filename = "<classifier>") {
    std::string line;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            return true;
        }
        return false;
    };

    if (!next_line() || line != "structrank.ffnn\tv1")
        throw FormatError(filename + ": not a structrank.ffnn v1 file");

    if (!next_line()) throw FormatError(filename + ": truncated (dims)");
    auto fields = str::split(line, '\t');
    if (fields.size() != 4 || fields[0] != "dims")
        throw FormatError(filename + ": expected dims line");
    const int input_dim = static_cast<int>(num::parse_int(fields[1], "input dim"));
    const int hidden_dim = static_cast<int>(num::parse_int(fields[2], "hidden dim"));

    AcceptClassifier clf(input_dim, hidden_dim, ClassifierHyperparams{});
    auto read_row = [&](const char* tag, double* values, std::size_t count) {
        if (!next_line()) throw FormatError(filename + ": truncated (" + std::string(tag) + ")");
        auto row = str::split(line, '\t');
        if (row.size() != count + 1 || row[0] != tag)
            throw FormatError(filename + ": expected " + std::string(tag) + " row with " +
                              std::to_string(count) + " values");
        for (std::size_t i = 0; i < count; ++i) values[i] = num::parse_double(row[i + 1], tag);
    };
    for (int h = 0; h < hidden_dim; ++h)
        read_row("w1", clf.w1_.data() + static_cast<std::size_t>(h) * input_dim,
                 static_cast<std::size_t>(input_dim));
    read_row("b1", clf.b1_.data(), clf.b1_.size());
    read_row("w2", clf.w2_.data(), clf.w2_.size());
    read_row("b2", &clf.b2_, 1);

    if (!next_line()) throw FormatError(filename + ": truncated (hyper)");
    fields = str::split(line, '\t');
    if (fields.size() != 4 || fields[0] != "hyper")
        throw FormatError(filename + ": expected hyper line");
    clf.hyper_.learning_rate = num::parse_double(fields[1], "learning rate");
    clf.hyper_.epochs = static_cast<int>(num::parse_int(fields[2], "epochs"));
    clf.hyper_.seed = static_cast<std::uint64_t>(num::parse_int(fields[3], "seed"));
    return clf;
}

} // namespace structrank
