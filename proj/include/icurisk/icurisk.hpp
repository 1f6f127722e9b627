#pragma once

// Umbrella header: the whole library.

#include "attribution.hpp"
#include "core.hpp"
#include "data.hpp"
#include "eval.hpp"
#include "experiment.hpp"
#include "layers.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "params.hpp"
#include "riskspace.hpp"
#include "synth.hpp"
#include "train.hpp"
#include "transfer.hpp"
#include "tsne.hpp"
#include "version.hpp"
