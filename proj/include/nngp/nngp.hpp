#pragma once

#include "nngp/benchmark.hpp"
#include "nngp/dataset.hpp"
#include "nngp/errors.hpp"
#include "nngp/imputers.hpp"
#include "nngp/inference.hpp"
#include "nngp/kernel.hpp"
#include "nngp/kernel_oracle.hpp"
#include "nngp/parallel.hpp"
#include "nngp/rng.hpp"
#include "nngp/sampler.hpp"
#include "nngp/synthetic.hpp"

namespace nngp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nngp
