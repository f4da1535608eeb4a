#pragma once

#include <string>

#include "canet/model.hpp"

namespace canet {

// Checkpoints are JSON: format version, the resolved RunConfig, the data
// dimensions the model was built for, every named parameter with its
// shape and values, and the batch-norm running buffers. Loading rebuilds
// the model from the stored config and validates every shape.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(CanModel<double>& model, const std::string& path);
void save_checkpoint(CanModel<float>& model, const std::string& path);

// Throws DataError on version/shape mismatch or unreadable files.
CanModel<double> load_checkpoint_f64(const std::string& path);
CanModel<float> load_checkpoint_f32(const std::string& path);

// Peeks at the stored precision field without building a model.
std::string checkpoint_precision(const std::string& path);

}  // namespace canet
