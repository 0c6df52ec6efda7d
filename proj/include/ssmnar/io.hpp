#pragma once

#include <string>

#include "ssmnar/core.hpp"
#include "ssmnar/model.hpp"

namespace ssmnar {

// Dataset files are plain-text delimited tables. The header row declares
// the dimensions ("d=<d> K=<K>"); each sample row holds d feature columns,
// a 1-based label column (literal NA when the label is missing) and the
// indicator column. Features are written with 17 significant digits so
// round-trips are lossless.
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

// Sealed ground truth lives in its own file; estimation commands must
// never read it.
void write_truth(const std::string& path, const SealedTruth& truth,
                 int num_classes);
SealedTruth read_truth(const std::string& path);

// Model checkpoint: a plain-text array dump. First line is the
// architecture ("linear <d> <K>" or "hidden <d> <K> <width>"), then one
// flattened parameter per line.
void save_model(const std::string& path, const ModelParams& theta);
ModelParams load_model(const std::string& path);

}  // namespace ssmnar
