#pragma once

#include "copar/counts.hpp"
#include "copar/faults.hpp"
#include "copar/generator.hpp"
#include "copar/message.hpp"
#include "copar/metrics.hpp"
#include "copar/net.hpp"
#include "copar/node.hpp"
#include "copar/optimistic.hpp"
#include "copar/pessimistic.hpp"
#include "copar/rational.hpp"
#include "copar/reconcile.hpp"
#include "copar/sim.hpp"
#include "copar/sim_runner.hpp"
#include "copar/types.hpp"
#include "copar/workload.hpp"
