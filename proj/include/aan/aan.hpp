#pragma once

// Umbrella header for the whole library.

#include "aan/adam.hpp"
#include "aan/checkpoint.hpp"
#include "aan/consistency.hpp"
#include "aan/corpus.hpp"
#include "aan/explain.hpp"
#include "aan/gradcheck.hpp"
#include "aan/heatmap.hpp"
#include "aan/model.hpp"
#include "aan/rng.hpp"
#include "aan/synth.hpp"
#include "aan/tape.hpp"
#include "aan/tensor.hpp"
#include "aan/trainer.hpp"
