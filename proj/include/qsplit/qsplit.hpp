#pragma once

#include "qsplit/baselines.hpp"
#include "qsplit/channel.hpp"
#include "qsplit/config.hpp"
#include "qsplit/costs.hpp"
#include "qsplit/error.hpp"
#include "qsplit/harness.hpp"
#include "qsplit/ligd.hpp"
#include "qsplit/profiles.hpp"
#include "qsplit/scenario.hpp"
#include "qsplit/units.hpp"
#include "qsplit/utility.hpp"
