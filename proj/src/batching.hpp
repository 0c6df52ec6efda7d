#pragma once

#include <algorithm>
#include <vector>

#include "ssmnar/rng.hpp"

namespace ssmnar::detail {

// Without-replacement minibatch draws over a fixed index pool, reshuffled
// once the pool is exhausted.
struct BatchSampler {
  std::vector<int> indices;
  std::size_t pos = 0;

  void reshuffle(Rng& rng) {
    std::shuffle(indices.begin(), indices.end(), rng.engine());
    pos = 0;
  }

  std::vector<int> draw(int want, Rng& rng) {
    std::vector<int> batch;
    if (indices.empty()) return batch;
    batch.reserve(want);
    while (static_cast<int>(batch.size()) < want) {
      if (pos == indices.size()) reshuffle(rng);
      batch.push_back(indices[pos++]);
    }
    return batch;
  }
};

}  // namespace ssmnar::detail
