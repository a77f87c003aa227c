#pragma once

#include "mbmf/config_io.hpp"
#include "mbmf/cost.hpp"
#include "mbmf/dqn.hpp"
#include "mbmf/errors.hpp"
#include "mbmf/experiment.hpp"
#include "mbmf/expert_mb.hpp"
#include "mbmf/expert_mf.hpp"
#include "mbmf/harness.hpp"
#include "mbmf/meta_controller.hpp"
#include "mbmf/outputs.hpp"
#include "mbmf/policy.hpp"
#include "mbmf/random.hpp"
#include "mbmf/world.hpp"
#include "mbmf/world_io.hpp"
