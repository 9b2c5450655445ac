#pragma once

// Umbrella header for the whole library.

#include "schemamap/agent.hpp"
#include "schemamap/backend.hpp"
#include "schemamap/confidence.hpp"
#include "schemamap/errors.hpp"
#include "schemamap/evidence.hpp"
#include "schemamap/prompts.hpp"
#include "schemamap/providers.hpp"
#include "schemamap/record.hpp"
#include "schemamap/report.hpp"
#include "schemamap/request.hpp"
#include "schemamap/schema.hpp"
#include "schemamap/simulation.hpp"
#include "schemamap/util.hpp"
