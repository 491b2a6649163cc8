#pragma once

#include "gwmodel/collin.hpp"
#include "gwmodel/dataset.hpp"
#include "gwmodel/distance.hpp"
#include "gwmodel/errors.hpp"
#include "gwmodel/gwpca.hpp"
#include "gwmodel/gwr.hpp"
#include "gwmodel/gwss.hpp"
#include "gwmodel/io.hpp"
#include "gwmodel/mcd.hpp"
#include "gwmodel/parallel.hpp"
#include "gwmodel/weighting.hpp"
