#pragma once

#include "lss/agent.hpp"
#include "lss/artifact_store.hpp"
#include "lss/bench.hpp"
#include "lss/binding.hpp"
#include "lss/digest.hpp"
#include "lss/errors.hpp"
#include "lss/evolution.hpp"
#include "lss/front_matter.hpp"
#include "lss/provenance.hpp"
#include "lss/task_pool.hpp"
#include "lss/tokens.hpp"
#include "lss/view.hpp"
