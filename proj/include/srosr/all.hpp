#pragma once

#include "srosr/baselines.hpp"
#include "srosr/dataset.hpp"
#include "srosr/evt.hpp"
#include "srosr/harness.hpp"
#include "srosr/model_io.hpp"
#include "srosr/report.hpp"
#include "srosr/sparse.hpp"
#include "srosr/srosr.hpp"
