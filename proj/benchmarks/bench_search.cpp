#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "hyperpatch/compose.hpp"
#include "hyperpatch/search.hpp"

namespace {

using namespace hyperpatch;

ActivationTensor noise(const std::string& layer, std::uint32_t extent, std::uint32_t depth,
                       std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    std::vector<float> v(static_cast<std::size_t>(extent) * extent * depth);
    for (auto& x : v) x = dist(gen);
    return ActivationTensor(layer, extent, extent, depth, std::move(v));
}

struct Fixture {
    LayerSpec layer{"l", 2, 2, 8, 4, 2, LayerRole::Decoder};
    TrainingDatabase db;
    ActivationTensor query;
    std::vector<std::uint32_t> ids;

    Fixture(std::size_t pairs, std::uint32_t extent) : query(noise("l", extent, 8, 999)) {
        std::vector<TrainingPair> list;
        for (std::size_t i = 0; i < pairs; ++i) {
            TrainingPair p;
            p.image_id = static_cast<std::uint32_t>(i);
            p.tensors.emplace("l", noise("l", extent, 8, i));
            p.input_image = Raster(extent * 2, extent * 2, {10, 20, 30});
            p.output_image = p.input_image;
            list.push_back(std::move(p));
        }
        db = TrainingDatabase({layer}, "", std::move(list));
        ids.resize(pairs);
        std::iota(ids.begin(), ids.end(), 0u);
    }
};

void BM_CosineDistance(benchmark::State& state) {
    const auto t = noise("l", 4, static_cast<std::uint32_t>(state.range(0)), 1);
    const LayerSpec spec{"l", 2, 2, static_cast<std::uint32_t>(state.range(0)), 2, 1, LayerRole::Decoder};
    const auto a = extract_hyperpatch(t, {0, 0}, spec);
    const auto b = extract_hyperpatch(t, {2, 2}, spec);
    for (auto _ : state) benchmark::DoNotOptimize(cosine_distance(a, b));
}
BENCHMARK(BM_CosineDistance)->Arg(64)->Arg(512);

void BM_Exhaustive(benchmark::State& state) {
    const Fixture f(static_cast<std::size_t>(state.range(0)), 32);
    for (auto _ : state) {
        benchmark::DoNotOptimize(exhaustive_search(f.query, f.db, f.layer, f.ids));
    }
}
BENCHMARK(BM_Exhaustive)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_HyperPatchMatch(benchmark::State& state) {
    const Fixture f(16, 32);
    SearchConfig config;
    config.iterations = static_cast<std::uint32_t>(state.range(0));
    config.candidate_image_ids = f.ids;
    config.threads = static_cast<unsigned>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(hpm_run(f.query, f.db, f.layer, config));
}
BENCHMARK(BM_HyperPatchMatch)->Args({64, 1})->Args({64, 4})->Args({1024, 4})->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
    const Fixture f(4, 64);
    const auto field = exhaustive_search(f.db.tensor(0, "l"), f.db, f.layer, std::vector<std::uint32_t>{0});
    for (auto _ : state) {
        benchmark::DoNotOptimize(reconstruct(field, f.db, f.layer, ImageSource::Output,
                                             static_cast<unsigned>(state.range(0))));
    }
}
BENCHMARK(BM_Reconstruct)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
