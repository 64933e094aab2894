#pragma once

#include "sqlo1/data_prep.hpp"
#include "sqlo1/errors.hpp"
#include "sqlo1/evaluate.hpp"
#include "sqlo1/execution.hpp"
#include "sqlo1/fragmenter.hpp"
#include "sqlo1/http_policy.hpp"
#include "sqlo1/policy.hpp"
#include "sqlo1/pruning.hpp"
#include "sqlo1/run_config.hpp"
#include "sqlo1/schema.hpp"
#include "sqlo1/search.hpp"
#include "sqlo1/sqlite.hpp"
#include "sqlo1/tasks.hpp"
