#pragma once

#include "rblu/baselines.hpp"
#include "rblu/error.hpp"
#include "rblu/io.hpp"
#include "rblu/ising.hpp"
#include "rblu/metrics.hpp"
#include "rblu/random.hpp"
#include "rblu/rblu_sampler.hpp"
#include "rblu/samplers.hpp"
#include "rblu/synth.hpp"
#include "rblu/types.hpp"

namespace rblu {
inline constexpr const char* kVersion = "0.1.0";
}
