#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "stitch/geometry.hpp"

using namespace stitch;

TEST_CASE("image corners order and values") {
    const auto c = image_corners(128, 96);
    CHECK(c[0].x == 0.0);   CHECK(c[0].y == 0.0);    // TL
    CHECK(c[1].x == 128.0); CHECK(c[1].y == 0.0);    // TR
    CHECK(c[2].x == 0.0);   CHECK(c[2].y == 96.0);   // BL
    CHECK(c[3].x == 128.0); CHECK(c[3].y == 96.0);   // BR
}

TEST_CASE("solve_dlt: zero offsets give the identity") {
    const Homography h = solve_dlt(FourPointOffsets{}, 128, 128);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(h.m[i][j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("solve_dlt: pure translation offsets give a translation matrix") {
    FourPointOffsets o;
    for (auto& v : o.d) v = {5.0, -3.0};
    const Homography h = solve_dlt(o, 64, 64);
    CHECK(h.m[0][0] == doctest::Approx(1.0));
    CHECK(h.m[0][2] == doctest::Approx(5.0));
    CHECK(h.m[1][2] == doctest::Approx(-3.0));
    CHECK(h.m[2][0] == doctest::Approx(0.0));
    CHECK(h.m[2][1] == doctest::Approx(0.0));
}

TEST_CASE("solve_dlt round trip: corners map to corner + offset") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const FourPointOffsets o = testutil::random_offsets(rng, 32.0);
        const Homography h = solve_dlt(o, 128, 128);
        const auto corners = image_corners(128, 128);
        for (int k = 0; k < 4; ++k) {
            const Vec2 p = warp_point(h, corners[k]);
            CHECK(std::abs(p.x - (corners[k].x + o.d[k].x)) < 1e-6);
            CHECK(std::abs(p.y - (corners[k].y + o.d[k].y)) < 1e-6);
        }
    }
}

TEST_CASE("solve_dlt rejects a degenerate (collinear) target quad") {
    // collapse all four corners onto the line y = 0
    FourPointOffsets o;
    o.d[2] = {0.0, -64.0};
    o.d[3] = {0.0, -64.0};
    CHECK_THROWS_AS(solve_dlt(o, 64, 64), NumericError);
}

TEST_CASE("inverse and compose") {
    Rng rng(22);
    const Homography h = solve_dlt(testutil::random_offsets(rng, 20.0), 100, 100);
    const Homography hi = h.inverse();
    const Homography id = h.compose(hi);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(id.m[i][j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
    CHECK(h.det() != 0.0);

    // compose applies rhs first
    Homography t1 = Homography::identity();
    t1.m[0][2] = 3.0;
    Homography t2 = Homography::identity();
    t2.m[1][2] = -2.0;
    const Vec2 p = warp_point(t1.compose(t2), {1.0, 1.0});
    CHECK(p.x == doctest::Approx(4.0));
    CHECK(p.y == doctest::Approx(-1.0));
}

TEST_CASE("warp_point throws when a point maps to infinity") {
    Homography h = Homography::identity();
    h.m[2][0] = -1.0;  // denominator 1 - x
    CHECK_THROWS_AS(warp_point(h, {1.0, 5.0}), NumericError);
}

TEST_CASE("canvas_extent: identity offsets reproduce the image frame") {
    const CanvasSpec c = canvas_extent(FourPointOffsets{}, 128, 128);
    CHECK(c.width == 128);
    CHECK(c.height == 128);
    CHECK(c.origin_shift.x == 0.0);
    CHECK(c.origin_shift.y == 0.0);
}

TEST_CASE("canvas_extent: known translation") {
    FourPointOffsets o;
    for (auto& v : o.d) v = {10.0, -6.5};
    const CanvasSpec c = canvas_extent(o, 100, 80);
    // x spans [0, 110], y spans [-6.5, 80]
    CHECK(c.width == 110);
    CHECK(c.height == 87);
    CHECK(c.origin_shift.x == 0.0);
    CHECK(c.origin_shift.y == 6.5);
}

TEST_CASE("canvas_extent equals the brute-force corner min/max") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const FourPointOffsets o = testutil::random_offsets(rng, 32.0);
        CanvasSpec got;
        try {
            got = canvas_extent(o, 128, 128);
        } catch (const NumericError&) {
            continue;  // degenerate draw
        }
        // oracle: min/max over the 4 reference corners and 4 displaced corners
        double minx = 0, miny = 0, maxx = 128, maxy = 128;
        const auto corners = image_corners(128, 128);
        for (int k = 0; k < 4; ++k) {
            minx = std::min(minx, corners[k].x + o.d[k].x);
            maxx = std::max(maxx, corners[k].x + o.d[k].x);
            miny = std::min(miny, corners[k].y + o.d[k].y);
            maxy = std::max(maxy, corners[k].y + o.d[k].y);
        }
        CHECK(got.width == static_cast<int>(std::ceil(maxx - minx)));
        CHECK(got.height == static_cast<int>(std::ceil(maxy - miny)));
        CHECK(got.origin_shift.x == -minx);
        CHECK(got.origin_shift.y == -miny);
    }
}
