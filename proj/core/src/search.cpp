#include "hyperpatch/search.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include "hyperpatch/error.hpp"

namespace hyperpatch {

namespace {

/// Splits [0, rows) into contiguous chunks, one per worker, and sums the
/// per-chunk evaluation counts. Work per row must be independent.
template <typename RowFn>
std::uint64_t parallel_rows(std::uint32_t rows, unsigned threads, RowFn&& fn) {
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, rows));
    if (workers == 1) return fn(0u, rows);

    std::vector<std::uint64_t> counts(workers, 0);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        const std::uint32_t chunk = (rows + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::uint32_t begin = std::min(rows, w * chunk);
            const std::uint32_t end = std::min(rows, begin + chunk);
            pool.emplace_back([&, w, begin, end] { counts[w] = fn(begin, end); });
        }
    }
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    return total;
}

void require_candidates(std::span<const std::uint32_t> candidates) {
    if (candidates.empty()) throw Error(ErrorKind::EmptySet, "candidate image list is empty");
}

std::vector<double> anchor_norms(const ActivationTensor& tensor, const LayerSpec& layer,
                                 std::uint32_t rows, std::uint32_t cols) {
    std::vector<double> norms(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t y = 0; y < rows; ++y) {
        for (std::uint32_t x = 0; x < cols; ++x) {
            norms[static_cast<std::size_t>(y) * cols + x] =
                squared_norm(HyperPatchView(tensor, {y, x}, layer.hyperpatch_h, layer.hyperpatch_w));
        }
    }
    return norms;
}

}  // namespace

SearchContext::SearchContext(const ActivationTensor& query, const TrainingDatabase& db,
                             const LayerSpec& layer, std::span<const std::uint32_t> candidates)
    : query_(query), layer_(layer), candidates_(candidates.begin(), candidates.end()) {
    require_candidates(candidates);
    layer_.validate();
    if (query.depth() != layer_.depth || query.height() < layer_.hyperpatch_h ||
        query.width() < layer_.hyperpatch_w) {
        throw Error(ErrorKind::Shape, "query tensor " + std::to_string(query.height()) + "x" +
                                          std::to_string(query.width()) + "x" +
                                          std::to_string(query.depth()) + " does not fit layer '" +
                                          layer_.name + "'");
    }
    query_rows_ = layer_.anchor_rows(query.height());
    query_cols_ = layer_.anchor_cols(query.width());
    query_norms_ = anchor_norms(query, layer_, query_rows_, query_cols_);

    for (std::size_t i = 0; i < candidates_.size(); ++i) {
        const auto id = candidates_[i];
        for (std::size_t j = 0; j < i; ++j) {
            if (candidates_[j] == id) {
                throw Error(ErrorKind::Config,
                            "candidate image " + std::to_string(id) + " listed twice");
            }
        }
        const auto& t = db.tensor(id, layer_.name);
        check_tensor_matches(t, layer_);
        if (i == 0) {
            train_rows_ = layer_.anchor_rows(t.height());
            train_cols_ = layer_.anchor_cols(t.width());
        } else if (layer_.anchor_rows(t.height()) != train_rows_ ||
                   layer_.anchor_cols(t.width()) != train_cols_) {
            throw Error(ErrorKind::Shape, "candidate tensors differ in extent");
        }
        train_.push_back(&t);
        train_norms_.push_back(anchor_norms(t, layer_, train_rows_, train_cols_));
    }
}

float SearchContext::distance(Position q, std::size_t slot, Position t) const {
    const auto& train = *train_[slot];
    double dot = 0.0;
    for (std::uint32_t r = 0; r < layer_.hyperpatch_h; ++r) {
        detail::accumulate_dot(query_.run(q.y + r, q.x, layer_.hyperpatch_w),
                               train.run(t.y + r, t.x, layer_.hyperpatch_w), dot);
    }
    return detail::distance_from_parts(
        dot, query_norms_[static_cast<std::size_t>(q.y) * query_cols_ + q.x],
        train_norms_[slot][static_cast<std::size_t>(t.y) * train_cols_ + t.x]);
}

std::size_t SearchContext::slot_of(std::uint32_t image_id) const noexcept {
    const auto it = std::find(candidates_.begin(), candidates_.end(), image_id);
    return it == candidates_.end() ? npos : static_cast<std::size_t>(it - candidates_.begin());
}

Correspondence SearchContext::draw(SplitMix64& rng) const {
    const std::uint64_t per_image = positions_per_image();
    const std::uint64_t u = rng.uniform(per_image * candidates_.size());
    const auto slot = static_cast<std::size_t>(u / per_image);
    const auto pos = u % per_image;
    Correspondence c;
    c.image_id = candidates_[slot];
    c.pos = Position{static_cast<std::uint32_t>(pos / train_cols_),
                     static_cast<std::uint32_t>(pos % train_cols_)};
    return c;
}

NNField exhaustive_search(const ActivationTensor& query, const TrainingDatabase& db,
                          const LayerSpec& layer, std::span<const std::uint32_t> candidates,
                          unsigned threads) {
    require_candidates(candidates);
    std::vector<std::uint32_t> ordered(candidates.begin(), candidates.end());
    std::sort(ordered.begin(), ordered.end());
    ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

    const SearchContext ctx(query, db, layer, ordered);
    NNField field = ctx.empty_field();

    field.eval_count = parallel_rows(field.rows, threads, [&](std::uint32_t begin, std::uint32_t end) {
        std::uint64_t evals = 0;
        for (std::uint32_t r = begin; r < end; ++r) {
            for (std::uint32_t c = 0; c < field.cols; ++c) {
                Correspondence best;
                bool have = false;
                for (std::size_t slot = 0; slot < ordered.size(); ++slot) {
                    for (std::uint32_t ty = 0; ty < ctx.train_rows(); ++ty) {
                        for (std::uint32_t tx = 0; tx < ctx.train_cols(); ++tx) {
                            const float d = ctx.distance({r, c}, slot, {ty, tx});
                            ++evals;
                            if (!have || d < best.distance) {
                                best = Correspondence{ordered[slot], {ty, tx}, d};
                                have = true;
                            }
                        }
                    }
                }
                field.at(r, c) = best;
            }
        }
        return evals;
    });
    return field;
}

NNField hpm_init(const SearchContext& ctx, CellRngBank& rngs, unsigned threads) {
    NNField field = ctx.empty_field();
    if (rngs.size() != field.cells.size()) {
        throw Error(ErrorKind::Config, "rng bank size does not match the field");
    }
    field.eval_count = parallel_rows(field.rows, threads, [&](std::uint32_t begin, std::uint32_t end) {
        std::uint64_t evals = 0;
        for (std::uint32_t r = begin; r < end; ++r) {
            for (std::uint32_t c = 0; c < field.cols; ++c) {
                auto& cell = field.at(r, c);
                cell = ctx.draw(rngs[static_cast<std::size_t>(r) * field.cols + c]);
                cell.distance = ctx.distance({r, c}, ctx.slot_of(cell.image_id), cell.pos);
                ++evals;
            }
        }
        return evals;
    });
    return field;
}

NNField hpm_propagate(const NNField& field, const SearchContext& ctx, Parity parity,
                      unsigned threads) {
    // Neighbour q + delta holding match t proposes t - delta for q.
    static constexpr std::array<std::array<int, 2>, 4> kOffsets{{{0, 1}, {1, 0}, {0, -1}, {-1, 0}}};

    NNField out = field;
    const auto rows = static_cast<std::int64_t>(field.rows);
    const auto cols = static_cast<std::int64_t>(field.cols);
    const auto train_rows = static_cast<std::int64_t>(ctx.train_rows());
    const auto train_cols = static_cast<std::int64_t>(ctx.train_cols());

    const auto evals = parallel_rows(field.rows, threads, [&](std::uint32_t begin, std::uint32_t end) {
        std::uint64_t count = 0;
        for (std::uint32_t i = begin; i < end; ++i) {
            const std::uint32_t r = parity == Parity::Even ? i : begin + (end - 1 - i);
            for (std::uint32_t k = 0; k < field.cols; ++k) {
                const std::uint32_t c = parity == Parity::Even ? k : field.cols - 1 - k;
                Correspondence best = field.at(r, c);
                for (const auto& [dy, dx] : kOffsets) {
                    const std::int64_t ny = static_cast<std::int64_t>(r) + dy;
                    const std::int64_t nx = static_cast<std::int64_t>(c) + dx;
                    if (ny < 0 || ny >= rows || nx < 0 || nx >= cols) continue;
                    const auto& neighbour = field.at(static_cast<std::uint32_t>(ny),
                                                     static_cast<std::uint32_t>(nx));
                    const std::int64_t py = static_cast<std::int64_t>(neighbour.pos.y) - dy;
                    const std::int64_t px = static_cast<std::int64_t>(neighbour.pos.x) - dx;
                    if (py < 0 || py >= train_rows || px < 0 || px >= train_cols) continue;
                    const Position proposal{static_cast<std::uint32_t>(py),
                                            static_cast<std::uint32_t>(px)};
                    if (neighbour.image_id == best.image_id && proposal == best.pos) continue;
                    const auto slot = ctx.slot_of(neighbour.image_id);
                    if (slot == SearchContext::npos) continue;
                    const float d = ctx.distance({r, c}, slot, proposal);
                    ++count;
                    if (d < best.distance) best = Correspondence{neighbour.image_id, proposal, d};
                }
                out.at(r, c) = best;
            }
        }
        return count;
    });
    out.eval_count += evals;
    return out;
}

NNField hpm_random_search(NNField field, const SearchContext& ctx, CellRngBank& rngs,
                          std::uint32_t samples, unsigned threads) {
    if (rngs.size() != field.cells.size()) {
        throw Error(ErrorKind::Config, "rng bank size does not match the field");
    }
    const auto evals = parallel_rows(field.rows, threads, [&](std::uint32_t begin, std::uint32_t end) {
        std::uint64_t count = 0;
        for (std::uint32_t r = begin; r < end; ++r) {
            for (std::uint32_t c = 0; c < field.cols; ++c) {
                auto& rng = rngs[static_cast<std::size_t>(r) * field.cols + c];
                auto& cell = field.at(r, c);
                for (std::uint32_t s = 0; s < samples; ++s) {
                    auto proposal = ctx.draw(rng);
                    proposal.distance = ctx.distance({r, c}, ctx.slot_of(proposal.image_id),
                                                     proposal.pos);
                    ++count;
                    if (proposal.distance < cell.distance) cell = proposal;
                }
            }
        }
        return count;
    });
    field.eval_count += evals;
    return field;
}

NNField hpm_refine(NNField start, const SearchContext& ctx, const SearchConfig& config,
                   CellRngBank& rngs, const RoundObserver& observer) {
    NNField field = std::move(start);
    for (std::uint32_t round = 0; round < config.iterations; ++round) {
        field = hpm_random_search(std::move(field), ctx, rngs,
                                  config.random_samples_per_cell_per_iter, config.threads);
        field = hpm_propagate(field, ctx, round % 2 == 0 ? Parity::Even : Parity::Odd,
                              config.threads);
        if (observer) observer(round + 1, field);
    }
    return field;
}

NNField hpm_run(const SearchContext& ctx, const SearchConfig& config,
                const RoundObserver& observer) {
    CellRngBank rngs(config.rng_seed,
                     static_cast<std::size_t>(ctx.field_rows()) * ctx.field_cols());
    NNField field = hpm_init(ctx, rngs, config.threads);
    return hpm_refine(std::move(field), ctx, config, rngs, observer);
}

NNField hpm_run(const ActivationTensor& query, const TrainingDatabase& db, const LayerSpec& layer,
                const SearchConfig& config, const RoundObserver& observer) {
    const SearchContext ctx(query, db, layer, config.candidate_image_ids);
    return hpm_run(ctx, config, observer);
}

void validate_field(const NNField& field, const TrainingDatabase& db, const LayerSpec& layer) {
    if (field.layer_name != layer.name) {
        throw Error(ErrorKind::Config, "field was built at layer '" + field.layer_name +
                                           "', not '" + layer.name + "'");
    }
    if (field.rows == 0 || field.cols == 0 ||
        field.cells.size() != static_cast<std::size_t>(field.rows) * field.cols) {
        throw Error(ErrorKind::Config, "field grid is empty or inconsistent");
    }
    for (std::size_t i = 0; i < field.cells.size(); ++i) {
        const auto& cell = field.cells[i];
        if (cell.image_id >= db.size()) {
            throw Error(ErrorKind::Config, "field cell " + std::to_string(i) +
                                               " references unknown image " +
                                               std::to_string(cell.image_id));
        }
        if (!std::isfinite(cell.distance)) {
            throw Error(ErrorKind::Config, "field cell " + std::to_string(i) +
                                               " has a non-finite distance");
        }
        const auto& pair = db.pair(cell.image_id);
        const auto it = pair.tensors.find(layer.name);
        if (it != pair.tensors.end()) {
            if (cell.pos.y >= layer.anchor_rows(it->second.height()) ||
                cell.pos.x >= layer.anchor_cols(it->second.width())) {
                throw Error(ErrorKind::Config, "field cell " + std::to_string(i) +
                                                   " points outside its training tensor");
            }
        }
    }
}

}  // namespace hyperpatch
