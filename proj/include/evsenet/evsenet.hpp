// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evsenet/charge_sched.hpp"
#include "evsenet/core.hpp"
#include "evsenet/featurize.hpp"
#include "evsenet/lot_gen.hpp"
#include "evsenet/lp.hpp"
#include "evsenet/mlp.hpp"
#include "evsenet/model_io.hpp"
#include "evsenet/parking_sim.hpp"
#include "evsenet/pipeline.hpp"
#include "evsenet/random.hpp"
#include "evsenet/schedule_gen.hpp"
#include "evsenet/service.hpp"
