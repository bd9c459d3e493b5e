#pragma once

#include "smuce/confidence.hpp"
#include "smuce/error.hpp"
#include "smuce/expfam.hpp"
#include "smuce/experiments.hpp"
#include "smuce/multiscale.hpp"
#include "smuce/nulldist.hpp"
#include "smuce/quantile.hpp"
#include "smuce/rng.hpp"
#include "smuce/segdp.hpp"
#include "smuce/tuning.hpp"
