#pragma once

#include "pbcbf/errors.hpp"
#include "pbcbf/ode.hpp"
#include "pbcbf/numdiff.hpp"
#include "pbcbf/system.hpp"
#include "pbcbf/aircraft.hpp"
#include "pbcbf/barrier.hpp"
#include "pbcbf/policy.hpp"
#include "pbcbf/predictor.hpp"
#include "pbcbf/qp.hpp"
#include "pbcbf/filter.hpp"
#include "pbcbf/harness/controllers.hpp"
#include "pbcbf/harness/run.hpp"
#include "pbcbf/harness/io.hpp"
#include "pbcbf/harness/scenario.hpp"
