#pragma once

#include <string>

#include "stitch/tensor.hpp"

namespace stitch::io {

// Decodes PNG or JPEG (sniffed by magic bytes) to a (1,3,h,w) tensor in
// [0,1]; grayscale sources are replicated to three channels.
Tensor4 load_image(const std::string& path);

// Writes an 8-bit PNG (1 channel = grayscale, 3 = RGB). Values are clamped
// to [0,1] and quantized with round-half-even. Output bytes are
// deterministic (fixed settings, no ancillary chunks).
void save_png(const Tensor4& image, const std::string& path);

}  // namespace stitch::io
