// The OpenMP kernels must be bitwise identical to the serial references:
// they parallelize over independent outputs only, so every double is the
// result of the same accumulation order.
#include <doctest.h>

#include "helpers.hpp"
#include "stitch/kernels.hpp"
#include "stitch/rng.hpp"

using namespace stitch;
using testutil::bitwise_equal;
using testutil::random_tensor;

TEST_CASE("conv3x3 serial/omp parity across shapes") {
    Rng rng(11);
    for (auto [b, ci, co, h, w] : {std::array{1, 1, 1, 3, 3},
                                   std::array{2, 3, 4, 7, 5},
                                   std::array{1, 8, 8, 33, 17},
                                   std::array{3, 2, 6, 16, 16}}) {
        const Tensor4 in = random_tensor(b, ci, h, w, rng);
        const Tensor4 wt = random_tensor(co, ci, 3, 3, rng);
        const Tensor4 bs = random_tensor(1, co, 1, 1, rng);
        const Tensor4 gout = random_tensor(b, co, h, w, rng);

        Tensor4 o1(b, co, h, w), o2(b, co, h, w);
        kernels::serial::conv3x3_forward(in, wt, bs, o1);
        kernels::par::conv3x3_forward(in, wt, bs, o2);
        CHECK(bitwise_equal(o1, o2));

        Tensor4 g1(b, ci, h, w), g2(b, ci, h, w);
        kernels::serial::conv3x3_backward_input(gout, wt, g1);
        kernels::par::conv3x3_backward_input(gout, wt, g2);
        CHECK(bitwise_equal(g1, g2));

        Tensor4 gw1(co, ci, 3, 3), gb1(1, co, 1, 1), gw2(co, ci, 3, 3), gb2(1, co, 1, 1);
        kernels::serial::conv3x3_backward_params(in, gout, gw1, gb1);
        kernels::par::conv3x3_backward_params(in, gout, gw2, gb2);
        CHECK(bitwise_equal(gw1, gw2));
        CHECK(bitwise_equal(gb1, gb2));
    }
}

TEST_CASE("deconv2x2 serial/omp parity across shapes") {
    Rng rng(12);
    for (auto [b, ci, co, h, w] : {std::array{1, 1, 1, 2, 2},
                                   std::array{2, 4, 3, 5, 9},
                                   std::array{1, 6, 6, 16, 16}}) {
        const Tensor4 in = random_tensor(b, ci, h, w, rng);
        const Tensor4 wt = random_tensor(co, ci, 2, 2, rng);
        const Tensor4 bs = random_tensor(1, co, 1, 1, rng);
        const Tensor4 gout = random_tensor(b, co, 2 * h, 2 * w, rng);

        Tensor4 o1(b, co, 2 * h, 2 * w), o2(b, co, 2 * h, 2 * w);
        kernels::serial::deconv2x2_forward(in, wt, bs, o1);
        kernels::par::deconv2x2_forward(in, wt, bs, o2);
        CHECK(bitwise_equal(o1, o2));

        Tensor4 g1(b, ci, h, w), g2(b, ci, h, w);
        kernels::serial::deconv2x2_backward_input(gout, wt, g1);
        kernels::par::deconv2x2_backward_input(gout, wt, g2);
        CHECK(bitwise_equal(g1, g2));

        Tensor4 gw1(co, ci, 2, 2), gb1(1, co, 1, 1), gw2(co, ci, 2, 2), gb2(1, co, 1, 1);
        kernels::serial::deconv2x2_backward_params(in, gout, gw1, gb1);
        kernels::par::deconv2x2_backward_params(in, gout, gw2, gb2);
        CHECK(bitwise_equal(gw1, gw2));
        CHECK(bitwise_equal(gb1, gb2));
    }
}

TEST_CASE("dispatcher honors set_parallel") {
    Rng rng(13);
    const Tensor4 in = random_tensor(1, 2, 8, 8, rng);
    const Tensor4 wt = random_tensor(2, 2, 3, 3, rng);
    const Tensor4 bs = random_tensor(1, 2, 1, 1, rng);

    const bool before = kernels::use_parallel();
    Tensor4 a(1, 2, 8, 8), b(1, 2, 8, 8);
    kernels::set_parallel(false);
    CHECK(!kernels::use_parallel());
    kernels::conv3x3_forward(in, wt, bs, a);
    kernels::set_parallel(true);
    CHECK(kernels::use_parallel());
    kernels::conv3x3_forward(in, wt, bs, b);
    kernels::set_parallel(before);
    CHECK(bitwise_equal(a, b));
}
