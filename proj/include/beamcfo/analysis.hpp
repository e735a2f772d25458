// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beamcfo Authors

#pragma once

#include "beamcfo/analysis/bessel.hpp"
#include "beamcfo/analysis/crb.hpp"
#include "beamcfo/analysis/mse.hpp"
#include "beamcfo/analysis/quadrature.hpp"
