#include "ssmnar/core.hpp"

#include <algorithm>
#include <numeric>

namespace ssmnar {

std::vector<int> content_sorted_indices(const Dataset& dataset) {
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    for (int j = 0; j < dataset.dim(); ++j) {
      if (dataset.features(a, j) != dataset.features(b, j))
        return dataset.features(a, j) < dataset.features(b, j);
    }
    if (dataset.labels[a] != dataset.labels[b])
      return dataset.labels[a] < dataset.labels[b];
    return dataset.indicator[a] < dataset.indicator[b];
  });
  return order;
}

void validate(const Dataset& dataset) {
  const int n = dataset.size();
  if (dataset.num_classes < 1)
    throw ValidationError("dataset: class count must be >= 1");
  if (static_cast<int>(dataset.labels.size()) != n ||
      static_cast<int>(dataset.indicator.size()) != n)
    throw ValidationError("dataset: labels/indicator length mismatch with features");
  if (!dataset.features.allFinite())
    throw ValidationError("dataset: non-finite feature value");
  int labeled = 0;
  for (int i = 0; i < n; ++i) {
    const bool has_label = dataset.labels[i] != kMissingLabel;
    if (dataset.indicator[i] > 1)
      throw ValidationError("dataset: indicator not in {0,1} at index " + std::to_string(i));
    if (has_label != (dataset.indicator[i] == 1))
      throw ValidationError("dataset: indicator/label mismatch at index " + std::to_string(i));
    if (has_label && (dataset.labels[i] < 0 || dataset.labels[i] >= dataset.num_classes))
      throw ValidationError("dataset: label out of range at index " + std::to_string(i));
    labeled += dataset.indicator[i];
  }
  if (labeled == 0) throw ValidationError("dataset: no labeled samples");
}

}  // namespace ssmnar
