#pragma once

#include <cstdint>

#include "jacspec/rng.hpp"

namespace jacspec {

/// What a random stream is used for. Values are part of the reproducibility
/// contract; never renumber.
enum class StreamRole : std::uint64_t {
    Input = 1,
    InputLayer = 2,
    Hidden = 3,
    OutputLayer = 4,
    Mask = 5,
    PairSelect = 6,
    ConditionWeights = 7,
    ConditionMask = 8,
};

/// Stream allocation for one (seed index, depth) grid cell.
///
/// stream id = stream_id({role, seed_index, depth, layer}). Method parameters
/// (sigma_w2, eta, sparsity, scaling) are deliberately not part of the id:
/// every method evaluated at the same (seed, depth) sees the same underlying
/// Gaussian draws, which makes method-vs-baseline comparisons paired.
struct StreamPlan {
    std::uint64_t master_seed = 0;
    std::uint64_t seed_index = 0;
    std::uint64_t depth = 0;

    RngStream stream(StreamRole role, std::uint64_t layer = 0) const {
        return make_rng(master_seed,
                        stream_id({static_cast<std::uint64_t>(role), seed_index, depth, layer}));
    }

    /// The synthetic input depends on the seed index only, so every depth of
    /// one seed sees the same x.
    RngStream input_stream() const {
        return make_rng(master_seed,
                        stream_id({static_cast<std::uint64_t>(StreamRole::Input), seed_index, 0, 0}));
    }
};

}  // namespace jacspec
