#pragma once

#include <cstdint>

// Labels for the substreams a layer draws from. A layer's stream derives one
// child per purpose so the draws of one purpose never shift another's, e.g.
// point-estimate and gaussian layers see the same winner noise.
namespace lwta::noise_tag {

inline constexpr std::uint64_t kWeights = 1;
inline constexpr std::uint64_t kBias = 2;
inline constexpr std::uint64_t kWinners = 3;
// Layer l of a network draws from stream.derive(kLayerBase + l).
inline constexpr std::uint64_t kLayerBase = 100;

}  // namespace lwta::noise_tag
