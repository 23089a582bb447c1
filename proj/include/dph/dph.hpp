#pragma once

// Umbrella header for the dual-purpose hashing library.

#include "dph/dataset.hpp"
#include "dph/errors.hpp"
#include "dph/eval.hpp"
#include "dph/index.hpp"
#include "dph/matrix.hpp"
#include "dph/model.hpp"
#include "dph/retrieval.hpp"
#include "dph/rng.hpp"
#include "dph/serial.hpp"
