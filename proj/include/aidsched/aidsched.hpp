#pragma once

// Umbrella header for the aidsched loop-scheduling library.

#include "iteration_space.hpp"
#include "iter_pool.hpp"
#include "report.hpp"
#include "runtime.hpp"
#include "sched_math.hpp"
#include "schedule_config.hpp"
#include "scheduler.hpp"
#include "simulator.hpp"
#include "timing.hpp"
#include "topology.hpp"
#include "workload.hpp"
