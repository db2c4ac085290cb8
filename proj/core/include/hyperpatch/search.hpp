#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hyperpatch/database.hpp"
#include "hyperpatch/rng.hpp"
#include "hyperpatch/tensor.hpp"

namespace hyperpatch {

/// Best known match for one query hyperpatch (top-left anchored).
struct Correspondence {
    std::uint32_t image_id = 0;
    Position pos;
    float distance = 1.0f;

    friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

/// Dense nearest-neighbor field over every stride-1 anchor of a query tensor.
struct NNField {
    std::string layer_name;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<Correspondence> cells;
    std::uint64_t eval_count = 0;

    NNField() = default;
    NNField(std::string layer, std::uint32_t r, std::uint32_t c)
        : layer_name(std::move(layer)), rows(r), cols(c), cells(static_cast<std::size_t>(r) * c) {}

    Correspondence& at(std::uint32_t r, std::uint32_t c) {
        return cells[static_cast<std::size_t>(r) * cols + c];
    }
    const Correspondence& at(std::uint32_t r, std::uint32_t c) const {
        return cells[static_cast<std::size_t>(r) * cols + c];
    }

    friend bool operator==(const NNField&, const NNField&) = default;
};

struct SearchConfig {
    std::uint32_t iterations = 1024;
    std::uint64_t rng_seed = 0;
    std::uint32_t random_samples_per_cell_per_iter = 1;
    std::vector<std::uint32_t> candidate_image_ids;
    /// Worker count; never changes the result.
    unsigned threads = 1;
};

enum class Parity { Even, Odd };

/// Query + candidate tensors for one layer, with per-anchor squared norms
/// cached. Distances it returns are bit-identical to cosine_distance on the
/// corresponding views.
class SearchContext {
public:
    SearchContext(const ActivationTensor& query, const TrainingDatabase& db, const LayerSpec& layer,
                  std::span<const std::uint32_t> candidates);

    const LayerSpec& layer() const noexcept { return layer_; }
    std::span<const std::uint32_t> candidates() const noexcept { return candidates_; }

    std::uint32_t field_rows() const noexcept { return query_rows_; }
    std::uint32_t field_cols() const noexcept { return query_cols_; }
    std::uint32_t train_rows() const noexcept { return train_rows_; }
    std::uint32_t train_cols() const noexcept { return train_cols_; }
    std::uint64_t positions_per_image() const noexcept {
        return static_cast<std::uint64_t>(train_rows_) * train_cols_;
    }

    /// Distance between the query hyperpatch at `q` and candidate slot
    /// `slot`'s hyperpatch at `t`.
    float distance(Position q, std::size_t slot, Position t) const;

    /// Slot of `image_id` in the candidate list, or npos.
    std::size_t slot_of(std::uint32_t image_id) const noexcept;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    /// Draws one (image, position) uniformly over candidates x anchors.
    Correspondence draw(SplitMix64& rng) const;

    NNField empty_field() const { return NNField(layer_.name, query_rows_, query_cols_); }

private:
    const ActivationTensor& query_;
    LayerSpec layer_;
    std::vector<std::uint32_t> candidates_;
    std::vector<const ActivationTensor*> train_;
    std::vector<double> query_norms_;
    std::vector<std::vector<double>> train_norms_;
    std::uint32_t query_rows_ = 0;
    std::uint32_t query_cols_ = 0;
    std::uint32_t train_rows_ = 0;
    std::uint32_t train_cols_ = 0;
};

/// Global argmin per cell over every candidate and anchor; ties go to the
/// lower image id, then the earlier row-major anchor. eval_count is exactly
/// cells x candidates x anchors.
NNField exhaustive_search(const ActivationTensor& query, const TrainingDatabase& db,
                          const LayerSpec& layer, std::span<const std::uint32_t> candidates,
                          unsigned threads = 1);

/// Uniformly random assignment, one draw from each cell's stream.
NNField hpm_init(const SearchContext& ctx, CellRngBank& rngs, unsigned threads = 1);

/// Every cell considers its four axis neighbours' matches shifted back by the
/// neighbour offset and adopts a strictly better one. Reads `field`, writes a
/// fresh field; parity only flips the scan order.
NNField hpm_propagate(const NNField& field, const SearchContext& ctx, Parity parity,
                      unsigned threads = 1);

/// `samples` uniform draws per cell, keeping strict improvements.
NNField hpm_random_search(NNField field, const SearchContext& ctx, CellRngBank& rngs,
                          std::uint32_t samples = 1, unsigned threads = 1);

/// Called after each round with the 1-based round index.
using RoundObserver = std::function<void(std::uint32_t round, const NNField& field)>;

/// `config.iterations` rounds of (random search, propagate) starting from
/// `start`. The bank must be the one the start field was drawn from (or any
/// bank of the right size when starting from an externally built field).
NNField hpm_refine(NNField start, const SearchContext& ctx, const SearchConfig& config,
                   CellRngBank& rngs, const RoundObserver& observer = {});

NNField hpm_run(const SearchContext& ctx, const SearchConfig& config,
                const RoundObserver& observer = {});

NNField hpm_run(const ActivationTensor& query, const TrainingDatabase& db, const LayerSpec& layer,
                const SearchConfig& config, const RoundObserver& observer = {});

/// Throws Config unless every cell references a candidate-range image and an
/// in-bounds anchor of `db` at `layer`, and the distances are finite.
void validate_field(const NNField& field, const TrainingDatabase& db, const LayerSpec& layer);

}  // namespace hyperpatch
