#pragma once

#include "common.hpp"
#include "corpus.hpp"
#include "embedding.hpp"
#include "evaluation.hpp"
#include "mapping.hpp"
#include "model_io.hpp"
#include "pipeline.hpp"
#include "scoring.hpp"
