#pragma once

#include "segalign/config.hpp"
#include "segalign/constraints.hpp"
#include "segalign/core.hpp"
#include "segalign/decoder.hpp"
#include "segalign/eval.hpp"
#include "segalign/features.hpp"
#include "segalign/hmm.hpp"
#include "segalign/io.hpp"
#include "segalign/length_prior.hpp"
#include "segalign/model.hpp"
#include "segalign/neural.hpp"
#include "segalign/observation.hpp"
#include "segalign/parallel.hpp"
#include "segalign/report.hpp"
#include "segalign/scores.hpp"
#include "segalign/synth.hpp"
#include "segalign/training.hpp"
