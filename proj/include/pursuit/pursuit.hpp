#pragma once

#include "analysis.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "dictionary.hpp"
#include "engines.hpp"
#include "experiments.hpp"
#include "gram.hpp"
#include "learn.hpp"
#include "rng.hpp"
#include "simplex.hpp"
#include "space.hpp"
