#pragma once

#include "mindisc/data.hpp"
#include "mindisc/error.hpp"
#include "mindisc/evaluation.hpp"
#include "mindisc/losses.hpp"
#include "mindisc/matrix.hpp"
#include "mindisc/network.hpp"
#include "mindisc/numerics.hpp"
#include "mindisc/rng.hpp"
#include "mindisc/trainer.hpp"
