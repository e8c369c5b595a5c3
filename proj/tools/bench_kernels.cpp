// Timing comparison of the serial reference kernels against the OpenMP
// versions, with a bitwise equality check on every output.
#include <chrono>
#include <cstdio>
#include <functional>

#include "stitch/kernels.hpp"
#include "stitch/rng.hpp"
#include "stitch/tensor.hpp"

using namespace stitch;
using Clock = std::chrono::steady_clock;

namespace {

Tensor4 random_tensor(int b, int c, int h, int w, Rng& rng) {
    Tensor4 t(b, c, h, w);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool bitwise_equal(const Tensor4& a, const Tensor4& b) {
    if (a.shape != b.shape) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

int g_failures = 0;

void report(const char* name, double serial_ms, double par_ms, bool identical) {
    std::printf("%-26s serial %8.2f ms   omp %8.2f ms   speedup %5.2fx   %s\n",
                name, serial_ms, par_ms, serial_ms / par_ms,
                identical ? "bit-identical" : "MISMATCH");
    if (!identical) ++g_failures;
}

}  // namespace

int main() {
    Rng rng(42);
    const int B = 2, CI = 32, CO = 32, H = 128, W = 128;
    const int reps = 5;

    const Tensor4 in = random_tensor(B, CI, H, W, rng);
    const Tensor4 w3 = random_tensor(CO, CI, 3, 3, rng);
    const Tensor4 w2 = random_tensor(CO, CI, 2, 2, rng);
    const Tensor4 bias = random_tensor(1, CO, 1, 1, rng);
    const Tensor4 gout3 = random_tensor(B, CO, H, W, rng);
    const Tensor4 gout2 = random_tensor(B, CO, 2 * H, 2 * W, rng);

    {
        Tensor4 a(B, CO, H, W), b(B, CO, H, W);
        const double ts = time_ms([&] { kernels::serial::conv3x3_forward(in, w3, bias, a); }, reps);
        const double tp = time_ms([&] { kernels::par::conv3x3_forward(in, w3, bias, b); }, reps);
        report("conv3x3_forward", ts, tp, bitwise_equal(a, b));
    }
    {
        Tensor4 a(B, CI, H, W), b(B, CI, H, W);
        const double ts =
            time_ms([&] { kernels::serial::conv3x3_backward_input(gout3, w3, a); }, reps);
        const double tp =
            time_ms([&] { kernels::par::conv3x3_backward_input(gout3, w3, b); }, reps);
        report("conv3x3_backward_input", ts, tp, bitwise_equal(a, b));
    }
    {
        Tensor4 wa(CO, CI, 3, 3), ba(1, CO, 1, 1), wb(CO, CI, 3, 3), bb(1, CO, 1, 1);
        const double ts =
            time_ms([&] { kernels::serial::conv3x3_backward_params(in, gout3, wa, ba); }, reps);
        const double tp =
            time_ms([&] { kernels::par::conv3x3_backward_params(in, gout3, wb, bb); }, reps);
        report("conv3x3_backward_params", ts, tp,
               bitwise_equal(wa, wb) && bitwise_equal(ba, bb));
    }
    {
        Tensor4 a(B, CO, 2 * H, 2 * W), b(B, CO, 2 * H, 2 * W);
        const double ts =
            time_ms([&] { kernels::serial::deconv2x2_forward(in, w2, bias, a); }, reps);
        const double tp = time_ms([&] { kernels::par::deconv2x2_forward(in, w2, bias, b); }, reps);
        report("deconv2x2_forward", ts, tp, bitwise_equal(a, b));
    }
    {
        Tensor4 a(B, CI, H, W), b(B, CI, H, W);
        const double ts =
            time_ms([&] { kernels::serial::deconv2x2_backward_input(gout2, w2, a); }, reps);
        const double tp =
            time_ms([&] { kernels::par::deconv2x2_backward_input(gout2, w2, b); }, reps);
        report("deconv2x2_backward_input", ts, tp, bitwise_equal(a, b));
    }
    {
        Tensor4 wa(CO, CI, 2, 2), ba(1, CO, 1, 1), wb(CO, CI, 2, 2), bb(1, CO, 1, 1);
        const double ts =
            time_ms([&] { kernels::serial::deconv2x2_backward_params(in, gout2, wa, ba); }, reps);
        const double tp =
            time_ms([&] { kernels::par::deconv2x2_backward_params(in, gout2, wb, bb); }, reps);
        report("deconv2x2_backward_params", ts, tp,
               bitwise_equal(wa, wb) && bitwise_equal(ba, bb));
    }

    if (g_failures != 0) {
        std::printf("%d kernel(s) diverged from the serial reference\n", g_failures);
        return 1;
    }
    return 0;
}
