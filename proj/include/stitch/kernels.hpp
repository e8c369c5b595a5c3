#pragma once

#include "stitch/tensor.hpp"

namespace stitch::kernels {

// Low-level layer kernels. Every kernel exists twice: a serial reference
// (namespace serial) and an OpenMP version (namespace par) that parallelizes
// over independent output elements only, so both produce bit-identical
// results. The unqualified entry points dispatch on use_parallel().

bool use_parallel();
void set_parallel(bool on);

namespace serial {

// in: (b,ci,h,w), weight: (co,ci,3,3), bias: (1,co,1,1), out: (b,co,h,w).
// Stride 1, zero padding 1.
void conv3x3_forward(const Tensor4& in, const Tensor4& weight,
                     const Tensor4& bias, Tensor4& out);
void conv3x3_backward_input(const Tensor4& gout, const Tensor4& weight,
                            Tensor4& gin);
void conv3x3_backward_params(const Tensor4& in, const Tensor4& gout,
                             Tensor4& gweight, Tensor4& gbias);

// 2x2 kernel, stride 2: each output pixel has exactly one source pixel.
// in: (b,ci,h,w), weight: (co,ci,2,2), out: (b,co,2h,2w).
void deconv2x2_forward(const Tensor4& in, const Tensor4& weight,
                       const Tensor4& bias, Tensor4& out);
void deconv2x2_backward_input(const Tensor4& gout, const Tensor4& weight,
                              Tensor4& gin);
void deconv2x2_backward_params(const Tensor4& in, const Tensor4& gout,
                               Tensor4& gweight, Tensor4& gbias);

}  // namespace serial

namespace par {

void conv3x3_forward(const Tensor4& in, const Tensor4& weight,
                     const Tensor4& bias, Tensor4& out);
void conv3x3_backward_input(const Tensor4& gout, const Tensor4& weight,
                            Tensor4& gin);
void conv3x3_backward_params(const Tensor4& in, const Tensor4& gout,
                             Tensor4& gweight, Tensor4& gbias);
void deconv2x2_forward(const Tensor4& in, const Tensor4& weight,
                       const Tensor4& bias, Tensor4& out);
void deconv2x2_backward_input(const Tensor4& gout, const Tensor4& weight,
                              Tensor4& gin);
void deconv2x2_backward_params(const Tensor4& in, const Tensor4& gout,
                               Tensor4& gweight, Tensor4& gbias);

}  // namespace par

void conv3x3_forward(const Tensor4& in, const Tensor4& weight,
                     const Tensor4& bias, Tensor4& out);
void conv3x3_backward_input(const Tensor4& gout, const Tensor4& weight,
                            Tensor4& gin);
void conv3x3_backward_params(const Tensor4& in, const Tensor4& gout,
                             Tensor4& gweight, Tensor4& gbias);
void deconv2x2_forward(const Tensor4& in, const Tensor4& weight,
                       const Tensor4& bias, Tensor4& out);
void deconv2x2_backward_input(const Tensor4& gout, const Tensor4& weight,
                              Tensor4& gin);
void deconv2x2_backward_params(const Tensor4& in, const Tensor4& gout,
                               Tensor4& gweight, Tensor4& gbias);

// Pooling and resize are cheap relative to the convolutions; serial only.
// Odd trailing rows/columns are dropped (out = floor(in/2)).
void maxpool2x2_forward(const Tensor4& in, Tensor4& out,
                        std::vector<int>& argmax);
void maxpool2x2_backward(const Tensor4& gout, const std::vector<int>& argmax,
                         Tensor4& gin);

// Bilinear resize to (oh, ow); source coordinate (x+0.5)*w/ow - 0.5 clamped
// to the image, so resize at scale 1 is the exact identity.
void resize_bilinear_forward(const Tensor4& in, int oh, int ow, Tensor4& out);
void resize_bilinear_backward(const Tensor4& gout, int ih, int iw, Tensor4& gin);

void relu_forward(const Tensor4& in, Tensor4& out);
void relu_backward(const Tensor4& in, const Tensor4& gout, Tensor4& gin);

}  // namespace stitch::kernels
