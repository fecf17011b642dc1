// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "follmer/assignment.hpp"
#include "follmer/core.hpp"
#include "follmer/densities.hpp"
#include "follmer/experiment.hpp"
#include "follmer/flow.hpp"
#include "follmer/io.hpp"
#include "follmer/mcmc.hpp"
#include "follmer/metrics.hpp"
#include "follmer/parallel.hpp"
#include "follmer/registry.hpp"
#include "follmer/rng.hpp"
#include "follmer/sample_batch.hpp"
