#pragma once

#include "busghg/analytics.hpp"
#include "busghg/config.hpp"
#include "busghg/csv.hpp"
#include "busghg/emissions.hpp"
#include "busghg/error.hpp"
#include "busghg/gapfill.hpp"
#include "busghg/geo.hpp"
#include "busghg/ingest.hpp"
#include "busghg/io.hpp"
#include "busghg/pairing.hpp"
#include "busghg/parallel.hpp"
#include "busghg/pipeline.hpp"
#include "busghg/sinuosity.hpp"
#include "busghg/street_graph.hpp"
#include "busghg/synthgen.hpp"
#include "busghg/time.hpp"
