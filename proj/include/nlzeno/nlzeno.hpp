#pragma once

#include "nlzeno/params.hpp"
#include "nlzeno/coefficients.hpp"
#include "nlzeno/zeno.hpp"
#include "nlzeno/fock.hpp"
#include "nlzeno/sweep.hpp"
