#pragma once

#include "iqscc/errors.hpp"
#include "iqscc/numerics.hpp"
#include "iqscc/scenario.hpp"
#include "iqscc/beamforming.hpp"
#include "iqscc/barrier.hpp"
#include "iqscc/detection.hpp"
#include "iqscc/sca.hpp"
#include "iqscc/config.hpp"
#include "iqscc/commands.hpp"
