#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include "hyperpatch/compose.hpp"
#include "hyperpatch/error.hpp"
#include "hyperpatch/layers.hpp"
#include "hyperpatch/tensor.hpp"
#include "support/synthetic.hpp"

using namespace hyperpatch;

namespace {

ActivationTensor counting_tensor(std::uint32_t h, std::uint32_t w, std::uint32_t d) {
    std::vector<float> v(static_cast<std::size_t>(h) * w * d);
    std::iota(v.begin(), v.end(), 0.0f);
    return ActivationTensor("t", h, w, d, std::move(v));
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::Io;
}

}  // namespace

TEST_CASE("tensor construction enforces its invariants") {
    CHECK(kind_of([] { ActivationTensor("x", 0, 1, 1, {}); }) == ErrorKind::Shape);
    CHECK(kind_of([] { ActivationTensor("x", 1, 1, 2, {1.0f}); }) == ErrorKind::Shape);
    CHECK(kind_of([] { ActivationTensor("x", 1, 1, 1, {std::nanf("")}); }) == ErrorKind::NonFinite);
    const ActivationTensor t("x", 1, 2, 1, {1.0f, 2.0f});
    CHECK(t.at(0, 1, 0) == 2.0f);
}

TEST_CASE("extract_hyperpatch slices corners and rejects overflow") {
    const auto t = counting_tensor(4, 4, 2);
    const auto spec = testing::make_layer("t", 2, 2, 2, 1);

    SUBCASE("top-left") {
        const auto v = extract_hyperpatch(t, {0, 0}, spec).flatten();
        CHECK(v == std::vector<float>{0, 1, 2, 3, 8, 9, 10, 11});
    }
    SUBCASE("bottom-right") {
        const auto v = extract_hyperpatch(t, {2, 2}, spec).flatten();
        CHECK(v == std::vector<float>{20, 21, 22, 23, 28, 29, 30, 31});
    }
    SUBCASE("overflow by one cell") {
        try {
            extract_hyperpatch(t, {3, 3}, spec);
            FAIL("expected a bounds error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Bounds);
            CHECK(std::string(e.what()).find("(3, 3)") != std::string::npos);
            CHECK(std::string(e.what()).find("'t'") != std::string::npos);
        }
    }
}

TEST_CASE("cosine_distance worked examples") {
    const std::vector<float> a{3, 4};
    const std::vector<float> b{4, 3};
    CHECK(cosine_distance(a, b) == doctest::Approx(0.04).epsilon(1e-7));

    const std::vector<float> e1{1, 0, 0};
    const std::vector<float> e2{0, 1, 0};
    CHECK(cosine_distance(e1, e2) == 1.0f);
    CHECK(cosine_distance(e1, e1) == 0.0f);

    const std::vector<float> zero{0, 0, 0};
    CHECK(cosine_distance(zero, e1) == 1.0f);
    CHECK(cosine_distance(zero, zero) == 1.0f);

    const std::vector<float> neg{-1, 0, 0};
    CHECK(cosine_distance(e1, neg) == 2.0f);

    CHECK(kind_of([&] { cosine_distance(a, e1); }) == ErrorKind::Shape);
}

TEST_CASE("view distance equals flattened distance and rejects extent mismatch") {
    const auto t = testing::random_tensor("t", 5, 5, 3, 7);
    const auto spec = testing::make_layer("t", 2, 3, 2, 1);
    const auto va = extract_hyperpatch(t, {0, 1}, spec);
    const auto vb = extract_hyperpatch(t, {3, 2}, spec);
    CHECK(cosine_distance(va, vb) == cosine_distance(va.flatten(), vb.flatten()));

    const HyperPatchView narrow(t, {0, 0}, 2, 1);
    CHECK(kind_of([&] { cosine_distance(va, narrow); }) == ErrorKind::Shape);
}

TEST_CASE("cosine distance properties over random views") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<float> scale(0.01f, 100.0f);
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = testing::random_tensor("t", 4, 4, 3, 1000 + trial);
        const auto spec = testing::make_layer("t", 2, 3, 1, 1);
        const Position pa{static_cast<std::uint32_t>(gen() % 3), static_cast<std::uint32_t>(gen() % 3)};
        const Position pb{static_cast<std::uint32_t>(gen() % 3), static_cast<std::uint32_t>(gen() % 3)};
        const auto a = extract_hyperpatch(t, pa, spec).flatten();
        const auto b = extract_hyperpatch(t, pb, spec).flatten();

        CHECK(cosine_distance(a, a) == 0.0f);
        const float d = cosine_distance(a, b);
        CHECK(d == cosine_distance(b, a));
        CHECK(d >= -1e-6f);
        CHECK(d <= 2.0f + 1e-6f);

        auto scaled = b;
        const float c = scale(gen);
        for (auto& v : scaled) v *= c;
        CHECK(std::abs(cosine_distance(a, scaled) - d) <= 1e-6f);
    }
}

TEST_CASE("stride-1 hyperpatch views tile the tensor") {
    for (std::uint32_t hp = 1; hp <= 3; ++hp) {
        const auto t = counting_tensor(5, 4, 1);
        const auto spec = testing::make_layer("t", hp, 1, 1, 1);
        std::vector<bool> seen(20, false);
        for (std::uint32_t y = 0; y < spec.anchor_rows(5); ++y) {
            for (std::uint32_t x = 0; x < spec.anchor_cols(4); ++x) {
                for (float v : extract_hyperpatch(t, {y, x}, spec).flatten()) {
                    seen[static_cast<std::size_t>(v)] = true;
                }
            }
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
    }
}

TEST_CASE("layer_geometry maps cells to pixel rects") {
    auto enc2 = testing::make_layer("encoder2", 2, 128, 4, 4);
    CHECK(layer_geometry(enc2, {1, 3}) == ImageRect{4, 12, 4});
    CHECK(layer_geometry(enc2, {0, 0}) == ImageRect{0, 0, 4});
    auto dec2 = testing::make_layer("decoder2", 2, 128, 2, 2);
    CHECK(layer_geometry(dec2, {5, 0}) == ImageRect{10, 0, 2});

    // injective over positions
    std::set<std::pair<std::int64_t, std::int64_t>> seen;
    for (std::uint32_t y = 0; y < 10; ++y)
        for (std::uint32_t x = 0; x < 10; ++x) {
            const auto r = layer_geometry(dec2, {y, x});
            CHECK(seen.insert({r.top, r.left}).second);
        }
}

TEST_CASE("default layer table mirrors the published patch sizes") {
    const auto table = default_layer_table();
    REQUIRE(table.size() == 14);
    CHECK(table.front().name == "encoder1");
    CHECK(table.front().depth == 64);
    CHECK(table.front().patch_size == 2);
    CHECK(table[1].patch_size == 4);
    CHECK(table.back().name == "decoder2");
    CHECK(table.back().patch_size == 2);
    CHECK(table.back().depth == 128);
    for (const auto& spec : table) {
        CHECK(spec.hyperpatch_h == 2);
        CHECK(spec.scale * spec.hyperpatch_h == spec.patch_size);
        const auto extent = default_tensor_extent(spec, 256);
        const auto mask = coverage_mask(spec, spec.anchor_rows(extent), spec.anchor_cols(extent), 256, 256);
        CHECK(std::count(mask.begin(), mask.end(), false) == 0);
    }
    const auto descriptors = std::count_if(table.begin(), table.end(), [](const LayerSpec& s) {
        return s.role == LayerRole::Descriptor;
    });
    CHECK(descriptors == 1);
}
