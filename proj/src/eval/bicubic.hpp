#pragma once

#include "data/grid.hpp"

namespace cnf::eval {

// Catmull-Rom bicubic upsampling (a = -0.5), pixel-center alignment
// x_src = (x_dst + 0.5)/s - 0.5 with edge clamping. Separable, deterministic.
data::GridField bicubic_upsample(const data::GridField& lr, std::int64_t s);

// The four kernel weights for a fractional offset f in [0,1); they sum to 1.
void catmull_rom_weights(double f, double w[4]);

}  // namespace cnf::eval
