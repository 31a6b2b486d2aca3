#pragma once

#include "tabkde/copula.hpp"
#include "tabkde/core.hpp"
#include "tabkde/coreset.hpp"
#include "tabkde/csv.hpp"
#include "tabkde/dcr.hpp"
#include "tabkde/encoding.hpp"
#include "tabkde/error.hpp"
#include "tabkde/kde_sampler.hpp"
#include "tabkde/metrics.hpp"
#include "tabkde/model.hpp"
#include "tabkde/model_io.hpp"
#include "tabkde/table.hpp"
