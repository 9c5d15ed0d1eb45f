#pragma once

#include <cstddef>
#include <vector>

namespace specx {

// scores are the positive-class probabilities (or any monotone stand-in for
// AUC). labels are 0/1.

// Fraction of correct argmax predictions at the 0.5 threshold: predict 1 when
// score > 0.5, the exact tie 0.5 falls to class 0.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels);

// Rank-statistic (Mann-Whitney U) area under the ROC curve with midrank tie
// correction; equals all-pairs counting with ties worth 1/2. Returns NaN when
// either class is absent.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Area under the precision-recall step curve: sum of precision-at-k over
// positive hits, divided by the positive count. Descending scores, ties broken
// by original index. NaN when no positives.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean of per-class average precision over both classes (class 0 is scored by
// the complement). NaN when either class is absent.
double mean_average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace specx
