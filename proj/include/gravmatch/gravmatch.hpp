#pragma once

#include "gravmatch/error.hpp"
#include "gravmatch/geo.hpp"
#include "gravmatch/harness.hpp"
#include "gravmatch/iccp.hpp"
#include "gravmatch/insmodel.hpp"
#include "gravmatch/mapgrid.hpp"
#include "gravmatch/matcher.hpp"
