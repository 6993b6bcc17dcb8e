#pragma once

#include <cstdint>

#include "data/grid.hpp"

namespace cnf::data {

// Gaussian random field by spectral synthesis: complex white noise shaped by
// |k|^(-beta/2), brought to grid space with an inverse DFT, then min-max
// normalized so the result spans [0,1] exactly. Deterministic in the seed.
// Works for any extents >= 8 (the transform is a separable direct DFT, no
// power-of-two restriction).
GridField generate_grf(std::uint64_t seed, std::int64_t height, std::int64_t width, double beta);

}  // namespace cnf::data
