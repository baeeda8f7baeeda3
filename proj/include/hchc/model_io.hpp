#pragma once

#include <filesystem>

#include "hchc/nn.hpp"

namespace hchc {

// Binary model files: the "HCHCMDL1" magic, then encoder, decoder and head,
// each as a layer count followed by (input_dim, output_dim, activation,
// weights, bias) per layer. Integers are little-endian u64, the activation
// is one byte, parameters are raw IEEE-754 doubles. Optimizer state is not
// stored.

void save_model(const std::filesystem::path& path, const GldcModel& model);
GldcModel load_model(const std::filesystem::path& path);

}  // namespace hchc
