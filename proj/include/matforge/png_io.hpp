#pragma once

#include <string>

#include "matforge/image.hpp"

namespace matforge {

/// Writes an 8-bit non-interlaced PNG (grayscale or rgb by plane channels).
/// `gamma_encode` applies pow(v, 1/2.2) before quantization; use it for
/// albedo/render planes and leave data maps linear.
void write_png(const std::string& path, const ImagePlane& img, bool gamma_encode);

/// Reads an 8-bit PNG (gray, gray+alpha, rgb or rgba; alpha dropped).
/// Values are returned as stored, scaled to [0,1]; no gamma decode.
ImagePlane read_png(const std::string& path);

} // namespace matforge
