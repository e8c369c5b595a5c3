#pragma once

#include "stitch/geometry.hpp"
#include "stitch/tensor.hpp"

namespace stitch {

// Content masks (warped footprints of an all-one image) and seam masks
// (dilated overlap-boundary bands) for one aligned pair. All maps are
// single-channel, canvas-sized, values in [0,1].
struct MaskSet {
    Tensor4 content_a;
    Tensor4 content_b;
    Tensor4 seam_a;
    Tensor4 seam_b;
};

// Stitching-domain warp: output pixel (x,y) samples the source image at
// h^-1 * (x - shift, y - shift) with bilinear interpolation and zero outside
// the source. Differentiable with respect to the image argument.
Tensor4 warp_image(const Tensor4& image, const Homography& h, const CanvasSpec& canvas);

// Adjoint of warp_image in its image argument: scatters canvas-space
// gradients back to source pixels.
Tensor4 warp_image_backward_input(const Tensor4& gout, const Homography& h,
                                  const CanvasSpec& canvas, Shape4 in_shape);

// warp_image applied to the all-one image of the given source size.
Tensor4 content_mask(const Homography& h, const CanvasSpec& canvas, int img_w, int img_h);

// Per-pixel L1 forward-difference magnitude
// |m(i,j)-m(i-1,j)| + |m(i,j)-m(i,j-1)| with out-of-range neighbors = 0,
// so the top/left canvas border of a filled mask reads as an edge.
Tensor4 mask_gradient(const Tensor4& m);

// Seam masks: gradient of the opposite content mask, convolved three times
// with the 3x3 all-one kernel (zero padding, unnormalized sum), clipped to
// [0,1], then multiplied by the own content mask.
std::pair<Tensor4, Tensor4> seam_masks(const Tensor4& content_a, const Tensor4& content_b);

// sum(content_a .* content_b) / sum(content_a); throws NumericError when
// content_a has zero area.
double overlap_rate(const Tensor4& content_a, const Tensor4& content_b);

MaskSet build_mask_set(const Homography& h_a, const Homography& h_b,
                       const CanvasSpec& canvas, int img_w, int img_h);

}  // namespace stitch
