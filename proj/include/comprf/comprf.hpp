#pragma once

#include "comprf/comptree.hpp"
#include "comprf/config.hpp"
#include "comprf/dataset.hpp"
#include "comprf/error.hpp"
#include "comprf/eval.hpp"
#include "comprf/experiment.hpp"
#include "comprf/forest.hpp"
#include "comprf/io.hpp"
#include "comprf/matrix.hpp"
#include "comprf/oracle.hpp"
#include "comprf/parallel.hpp"
#include "comprf/report.hpp"
#include "comprf/rng.hpp"
#include "comprf/theorysim.hpp"
#include "comprf/version.hpp"
