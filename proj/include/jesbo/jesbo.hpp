#pragma once

#include "jesbo/acquisitions.hpp"
#include "jesbo/benchmarks.hpp"
#include "jesbo/bo.hpp"
#include "jesbo/common.hpp"
#include "jesbo/gauss_math.hpp"
#include "jesbo/gp.hpp"
#include "jesbo/harness.hpp"
#include "jesbo/hyperfit.hpp"
#include "jesbo/maximize.hpp"
#include "jesbo/rff.hpp"
