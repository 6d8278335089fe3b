// SPDX-License-Identifier: Apache-2.0
//
// pass - pinching-antenna multi-user beamforming toolkit

#pragma once

#include "scenario.hpp"
#include "channel.hpp"
#include "rates.hpp"
#include "convex_kernel.hpp"
#include "ws_unicast.hpp"
#include "pdd.hpp"
#include "baselines.hpp"
#include "harness.hpp"
