#pragma once

#include "reid/augment.hpp"
#include "reid/core.hpp"
#include "reid/distance.hpp"
#include "reid/error.hpp"
#include "reid/eval.hpp"
#include "reid/io.hpp"
#include "reid/losses.hpp"
#include "reid/pipeline.hpp"
#include "reid/rerank.hpp"
#include "reid/synth.hpp"
