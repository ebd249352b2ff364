#ifndef GROUPLEARN_GROUPLEARN_HPP
#define GROUPLEARN_GROUPLEARN_HPP

#include "agent.hpp"
#include "broadcast.hpp"
#include "classify.hpp"
#include "core.hpp"
#include "env.hpp"
#include "harness.hpp"
#include "indices.hpp"
#include "metrics.hpp"
#include "simulation.hpp"

#endif // GROUPLEARN_GROUPLEARN_HPP
