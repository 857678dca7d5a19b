// Exact random-variate generation for the five component models and their
// mixtures. All outputs lie in [0, 2pi).
#pragma once

#include <cstddef>
#include <vector>

#include "torusmix/model.hpp"
#include "torusmix/rng.hpp"
#include "torusmix/special.hpp"

namespace torusmix {

struct RejectionStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
};

std::vector<double> rwnorm(std::size_t n, const ComponentParams& p, RngStream& rng);
AngleData rwnorm2(std::size_t n, const ComponentParams& p, RngStream& rng);

// Best-Fisher wrapped-Cauchy rejection sampler.
std::vector<double> rvm(std::size_t n, const ComponentParams& p, RngStream& rng,
                        RejectionStats* stats = nullptr);

// Uniform-proposal rejection samplers for the sine and cosine models.
AngleData rvmsin(std::size_t n, const ComponentParams& p, RngStream& rng, RejectionStats* stats = nullptr);
AngleData rvmcos(std::size_t n, const ComponentParams& p, RngStream& rng, RejectionStats* stats = nullptr);

// Maximum over the torus of the unnormalized log-density exponent of a sine
// (cosine = false) or cosine model centred at zero.
double bivariate_vm_log_majorant(bool cosine, double k1, double k2, double k3);

AngleData sample_component(ModelKind kind, std::size_t n, const ComponentParams& p, RngStream& rng);

struct MixtureDraw {
  AngleData data;
  std::vector<int> labels;  // 0-based component index of each row
};

MixtureDraw rmix(std::size_t n, ModelKind kind, const MixtureState& state, RngStream& rng);

}  // namespace torusmix
