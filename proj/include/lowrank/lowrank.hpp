#pragma once

#include "lowrank/matrix.hpp"
#include "lowrank/random.hpp"
#include "lowrank/svd.hpp"
#include "lowrank/optimizer.hpp"
#include "lowrank/lowrank_gradient.hpp"
#include "lowrank/toy_objective.hpp"
#include "lowrank/memory_model.hpp"
#include "lowrank/experiment.hpp"
#include "lowrank/selfcheck.hpp"
