#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "hyperpatch/compose.hpp"
#include "hyperpatch/error.hpp"
#include "hyperpatch/metrics.hpp"
#include "support/oracle.hpp"
#include "support/synthetic.hpp"

using namespace hyperpatch;
namespace oracle = hyperpatch::testing::oracle;

namespace {

constexpr Rgb kRed{255, 0, 0};
constexpr Rgb kBlue{0, 0, 255};

std::vector<std::uint32_t> all_ids(const TrainingDatabase& db) {
    std::vector<std::uint32_t> ids(db.size());
    std::iota(ids.begin(), ids.end(), 0u);
    return ids;
}

std::vector<oracle::Match> as_matches(const NNField& field) {
    std::vector<oracle::Match> out;
    for (const auto& c : field.cells) out.push_back({c.image_id, c.pos.y, c.pos.x, c.distance});
    return out;
}

std::vector<const Raster*> images(const TrainingDatabase& db, ImageSource source) {
    std::vector<const Raster*> out;
    for (const auto& p : db.pairs()) {
        out.push_back(source == ImageSource::Input ? &p.input_image : &p.output_image);
    }
    return out;
}

NNField uniform_field(const LayerSpec& layer, std::uint32_t rows, std::uint32_t cols,
                      std::uint32_t image_id) {
    NNField field(layer.name, rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c) field.at(r, c) = {image_id, {r, c}, 0.0f};
    return field;
}

}  // namespace

TEST_CASE("accumulator averages with round-half-up") {
    CompositionAccumulator acc(2, 1);
    acc.add(0, 0, {0, 1, 10});
    acc.add(0, 0, {255, 2, 11});
    const auto out = acc.finalize();
    CHECK(out.get(0, 0) == Rgb{128, 2, 11});
    CHECK(out.get(1, 0) == Rgb{0, 0, 0});
    CHECK(acc.uncovered_count() == 1);
    CHECK(acc.covered() == std::vector<bool>{true, false});

    CompositionAccumulator thirds(1, 1);
    for (std::uint8_t v : {0, 0, 1}) thirds.add(0, 0, {v, v, v});
    CHECK(thirds.finalize().get(0, 0) == Rgb{0, 0, 0});
}

TEST_CASE("self reconstruction is bit exact") {
    const auto layer = testing::make_layer("l", 2, 4, 4, 2);
    const auto db = testing::random_database(3, layer, 8, 12, true);
    const auto& query = db.tensor(1, "l");
    const auto field = exhaustive_search(query, db, layer, all_ids(db));
    const auto recon = reconstruct(field, db, layer, ImageSource::Input);
    CHECK(recon.uncovered_pixels == 0);
    CHECK(recon.image == db.pair(1).input_image);
    CHECK(reconstruct(field, db, layer, ImageSource::Output).image == db.pair(1).output_image);
}

TEST_CASE("reconstruction equals direct composition and is thread independent") {
    const auto layer = testing::make_layer("l", 2, 4, 4, 2);
    const auto db = testing::random_database(4, layer, 8, 13, true);
    const auto query = testing::composite_query(db, layer, 2, 1, 7, 0.3f);
    SearchConfig config;
    config.iterations = 3;
    config.candidate_image_ids = all_ids(db);
    const auto field = hpm_run(query, db, layer, config);

    for (auto source : {ImageSource::Input, ImageSource::Output}) {
        const auto expected = oracle::compose(as_matches(field), field.cols, images(db, source),
                                              layer.patch_size, layer.scale, 16, 16);
        const auto single = reconstruct(field, db, layer, source, 1);
        CHECK(single.image == expected);
        for (unsigned threads : {2u, 4u, 16u, 64u}) {
            const auto multi = reconstruct(field, db, layer, source, threads);
            CHECK(multi.image == single.image);
            CHECK(multi.covered == single.covered);
        }
    }
}

TEST_CASE("reconstruction from an all-red output") {
    const auto layer = testing::make_layer("l", 2, 2, 2, 1);
    auto db = testing::random_database(2, layer, 6, 3, true);
    std::vector<TrainingPair> pairs(db.pairs().begin(), db.pairs().end());
    pairs[0].output_image = Raster(6, 6, {200, 20, 20});
    const TrainingDatabase red({layer}, "", std::move(pairs));

    NNField field(layer.name, 5, 5);
    for (std::uint32_t i = 0; i < 25; ++i) field.cells[i] = {0, {(i * 3) % 5, (i * 7) % 5}, 0.5f};
    const auto recon = reconstruct(field, red, layer, ImageSource::Output);
    CHECK(recon.uncovered_pixels == 0);
    CHECK(recon.image == Raster(6, 6, {200, 20, 20}));
}

TEST_CASE("under-covering geometry reports black uncovered pixels") {
    const auto layer = testing::make_layer("l", 2, 2, 2, 2);
    auto db = testing::random_database(1, layer, 4, 4, true);
    const auto field = uniform_field(layer, 3, 3, 0);
    const auto recon = reconstruct(field, db, layer, ImageSource::Input);
    CHECK(recon.uncovered_pixels == 64 - 36);
    CHECK(recon.image.get(7, 7) == Rgb{0, 0, 0});
    CHECK(recon.image.get(0, 6) == Rgb{0, 0, 0});
    CHECK_FALSE(recon.covered[6 * 8]);
    CHECK(recon.covered[5 * 8 + 5]);
    CHECK(recon.covered == coverage_mask(layer, 3, 3, 8, 8));
}

TEST_CASE("reconstruct rejects mismatched inputs") {
    const auto layer = testing::make_layer("l", 2, 2, 2, 1);
    const auto db = testing::random_database(1, layer, 4, 4, true);
    auto field = uniform_field(layer, 3, 3, 0);
    field.layer_name = "other";
    CHECK_THROWS_AS(reconstruct(field, db, layer, ImageSource::Input), Error);

    const auto no_images = testing::random_database(1, layer, 4, 4, false);
    try {
        reconstruct(uniform_field(layer, 3, 3, 0), no_images, layer, ImageSource::Input);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
}

TEST_CASE("correspondence maps") {
    const auto layer = testing::make_layer("l", 2, 2, 2, 1);
    const auto db = testing::random_database(3, layer, 6, 6, true);
    const auto query = testing::random_raster(6, 6, 100);
    const auto palette = correspondence_palette();
    REQUIRE(palette.size() == 16);
    CHECK(std::set<Rgb>(palette.begin(), palette.end()).size() == 16);

    SUBCASE("single source") {
        const auto map = correspondence_map(uniform_field(layer, 5, 5, 2), db, layer, query);
        REQUIRE(map.sources.size() == 1);
        CHECK(map.sources[0].first == 2);
        REQUIRE(map.legend.size() == 1);
        CHECK(map.legend[0].key == "#e6194b");
        CHECK(map.legend[0].image_id == 2);
        for (std::uint32_t y = 0; y < 6; ++y)
            for (std::uint32_t x = 0; x < 6; ++x) {
                CHECK(map.query_tint.get(x, y) == blend_half(query.get(x, y), palette[0]));
                CHECK(map.sources[0].second.get(x, y) ==
                      blend_half(db.pair(2).input_image.get(x, y), palette[0]));
            }
        const auto legend = nlohmann::json::parse(map.legend_json());
        CHECK(legend["#e6194b"] == 2);
    }

    SUBCASE("two sources split by rows") {
        auto field = uniform_field(layer, 5, 5, 0);
        for (std::uint32_t c = 0; c < 5; ++c) {
            field.at(3, c).image_id = 2;
            field.at(4, c).image_id = 2;
        }
        const auto map = correspondence_map(field, db, layer, query);
        REQUIRE(map.sources.size() == 2);
        CHECK(map.sources[0].first == 0);
        CHECK(map.sources[1].first == 2);
        CHECK(map.query_tint.get(0, 0) == blend_half(query.get(0, 0), palette[0]));
        CHECK(map.query_tint.get(0, 5) == blend_half(query.get(0, 5), palette[1]));
        // pair 2 supplied only rows 3..5
        CHECK(map.sources[1].second.get(0, 0) == db.pair(2).input_image.get(0, 0));
        CHECK(map.sources[1].second.get(0, 4) == blend_half(db.pair(2).input_image.get(0, 4), palette[1]));
    }

    SUBCASE("legend cycles past sixteen sources") {
        const auto big = testing::random_database(17, layer, 6, 7, true);
        NNField field(layer.name, 5, 5);
        for (std::uint32_t i = 0; i < 25; ++i) field.cells[i] = {i % 17, {0, 0}, 0.0f};
        const auto map = correspondence_map(field, big, layer, query);
        REQUIRE(map.legend.size() == 17);
        CHECK(map.legend[16].key == "#e6194b:1");
        CHECK(map.legend[16].image_id == 16);
        std::set<std::string> keys;
        for (const auto& e : map.legend) keys.insert(e.key);
        CHECK(keys.size() == 17);
    }

    SUBCASE("empty field is rejected") {
        try {
            correspondence_map(NNField(layer.name, 0, 0), db, layer, query);
            FAIL("expected a config error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Config);
        }
    }
}

TEST_CASE("semantic correspondence") {
    const auto layer = testing::make_layer("l", 2, 4, 2, 1);
    const ClassPalette classes({{"red", kRed}, {"blue", kBlue}});
    const auto image = testing::random_raster(8, 8, 1);
    Raster labels(8, 8, kBlue);
    for (std::uint32_t y = 0; y < 4; ++y)
        for (std::uint32_t x = 0; x < 8; ++x) labels.set(x, y, kRed);
    SearchConfig config;
    config.iterations = 128;

    SUBCASE("identical members match themselves") {
        const auto t = testing::random_tensor("l", 8, 8, 4, 50);
        const SemanticMember a{t, image, labels};
        const std::vector<std::uint32_t> wanted{0, 1};
        const auto result = semantic_correspondence(a, a, layer, classes, wanted, config);
        for (std::uint32_t r = 0; r < result.field.rows; ++r)
            for (std::uint32_t c = 0; c < result.field.cols; ++c) CHECK(result.field.at(r, c).pos == Position{r, c});
        CHECK(result.query == result.match);
        CHECK(result.side_by_side.width == 16);
        CHECK(result.side_by_side.get(8 + 3, 2) == result.query.get(3, 2));
    }

    SUBCASE("an absent class adds no tint") {
        const auto t = testing::random_tensor("l", 8, 8, 4, 51);
        const Raster all_blue(8, 8, kBlue);
        const SemanticMember a{t, image, all_blue};
        const std::vector<std::uint32_t> wanted{0};
        const auto result = semantic_correspondence(a, a, layer, classes, wanted, config);
        CHECK(result.query == image);
        CHECK(result.match == image);
    }

    SUBCASE("swapped halves cross over") {
        const auto p = testing::random_tensor("l", 4, 8, 4, 60);
        const auto q = testing::random_tensor("l", 4, 8, 4, 61);
        std::vector<float> av(p.values().begin(), p.values().end());
        av.insert(av.end(), q.values().begin(), q.values().end());
        std::vector<float> bv(q.values().begin(), q.values().end());
        bv.insert(bv.end(), p.values().begin(), p.values().end());
        const ActivationTensor ta("l", 8, 8, 4, av);
        const ActivationTensor tb("l", 8, 8, 4, bv);
        const SemanticMember a{ta, image, labels};
        const SemanticMember b{tb, image, labels};
        const std::vector<std::uint32_t> wanted{0};
        const auto result = semantic_correspondence(a, b, layer, classes, wanted, config);

        const auto expected = oracle::brute_force(ta, {&tb}, {0}, 2, 2);
        for (std::uint32_t r = 0; r < 3; ++r) {
            for (std::uint32_t c = 0; c < result.field.cols; ++c) {
                const auto& cell = result.field.at(r, c);
                const auto& want = expected[r * result.field.cols + c];
                CHECK(cell.pos == Position{want.y, want.x});
                CHECK(cell.pos == Position{r + 4, c});
            }
        }
        // red class: query top rows tinted, matched rows in the bottom of b
        CHECK(result.query.get(0, 0) == blend_half(image.get(0, 0), kRed));
        CHECK(result.query.get(0, 7) == image.get(0, 7));
        CHECK(result.match.get(0, 4) == blend_half(image.get(0, 4), kRed));
    }

    SUBCASE("unknown classes and misaligned labels are rejected") {
        const auto t = testing::random_tensor("l", 8, 8, 4, 52);
        const SemanticMember a{t, image, labels};
        const std::vector<std::uint32_t> bad{5};
        CHECK_THROWS_AS(semantic_correspondence(a, a, layer, classes, bad, config), Error);
        const Raster small(4, 4);
        const SemanticMember skew{t, image, small};
        const std::vector<std::uint32_t> ok{0};
        CHECK_THROWS_AS(semantic_correspondence(skew, a, layer, classes, ok, config), Error);
    }
}
