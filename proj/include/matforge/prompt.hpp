#pragma once

#include <vector>

#include "matforge/image.hpp"

namespace matforge {

/// Width of the conditioning vector fed to the sequence models.
constexpr int kCondDim = 256;

/// Deterministic image-statistics embedding: 8x8x3 thumbnail (192) + 32-bin
/// luminance histogram + per-channel mean/std (6), zero-padded to kCondDim and
/// L2-normalized. Computed after bilinear resize to 128x128.
std::vector<float> encode_prompt(const ImagePlane& image);

} // namespace matforge
