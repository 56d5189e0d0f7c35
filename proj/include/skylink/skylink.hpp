#pragma once

#include "skylink/common.hpp"
#include "skylink/geometry.hpp"
#include "skylink/scenario.hpp"
#include "skylink/channel.hpp"
#include "skylink/link_table.hpp"
#include "skylink/environment.hpp"
#include "skylink/mlp.hpp"
#include "skylink/replay.hpp"
#include "skylink/dqn.hpp"
#include "skylink/policies.hpp"
#include "skylink/experiments.hpp"
