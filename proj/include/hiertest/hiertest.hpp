#pragma once

#include "hiertest/cost_model.hpp"
#include "hiertest/ctf.hpp"
#include "hiertest/hierarchy.hpp"
#include "hiertest/rng.hpp"
#include "hiertest/search.hpp"
#include "hiertest/strategy.hpp"
#include "hiertest/test_model.hpp"
#include "hiertest/util.hpp"
#include "hiertest/verify.hpp"
#include "hiertest/vine.hpp"

namespace hiertest {
inline constexpr const char* version = "0.1.0";
}
