#pragma once

#include "seroprev/analysis.hpp"
#include "seroprev/error.hpp"
#include "seroprev/estimators.hpp"
#include "seroprev/glm.hpp"
#include "seroprev/intervals.hpp"
#include "seroprev/io.hpp"
#include "seroprev/model.hpp"
#include "seroprev/report.hpp"
#include "seroprev/sandwich.hpp"
#include "seroprev/simulation.hpp"
#include "seroprev/variance.hpp"
