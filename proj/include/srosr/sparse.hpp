#pragma once

#include "srosr/dictionary.hpp"
#include "srosr/l1_solver.hpp"
#include "srosr/src.hpp"
