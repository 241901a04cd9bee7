#pragma once

#include <cstdint>
#include <vector>

#include "ktraj/geometry.hpp"

namespace ktraj {

struct PhantomOptions {
  bool randomize = true;   // jitter ellipse centres, axes, angles and intensities
  bool zero_phase = false; // real-valued images when set
  int supersample = 4;     // sub-pixel grid per axis for edge partial-volume
};

/// Modified Shepp-Logan phantom (Toft intensities), optionally randomized, multiplied by a
/// smooth random phase. Magnitudes are normalized so the maximum is 1.
ComplexImage shepp_logan(int n, std::uint64_t seed, PhantomOptions options = {});

/// `count` phantoms drawn from one seeded stream; N must be at least 32.
std::vector<ComplexImage> phantom_generate(int n, int count, std::uint64_t seed,
                                           PhantomOptions options = {});

}  // namespace ktraj
