#include "specx/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace specx {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("metrics: " + std::to_string(scores.size()) + " scores vs " +
                                    std::to_string(labels.size()) + " labels");
    if (scores.empty()) throw std::invalid_argument("metrics: empty input");
    for (int l : labels)
        if (l != 0 && l != 1) throw std::invalid_argument("metrics: labels must be 0/1");
}

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_inputs(scores, labels);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        hit += static_cast<std::size_t>((scores[i] > 0.5 ? 1 : 0) == labels[i]);
    return static_cast<double>(hit) / static_cast<double>(scores.size());
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_inputs(scores, labels);
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return kNan;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie groups keep the statistic equal to pair counting with
    // half-credit ties.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += midrank;
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_inputs(scores, labels);
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    if (n_pos == 0) return kNan;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[order[k]] != 1) continue;
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    return ap / static_cast<double>(n_pos);
}

double mean_average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_inputs(scores, labels);
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<std::size_t>(l);
    if (n_pos == 0 || n_pos == labels.size()) return kNan;

    std::vector<double> inv_scores(scores.size());
    std::vector<int> inv_labels(labels.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        inv_scores[i] = 1.0 - scores[i];
        inv_labels[i] = 1 - labels[i];
    }
    return 0.5 * (average_precision(scores, labels) + average_precision(inv_scores, inv_labels));
}

}  // namespace specx
