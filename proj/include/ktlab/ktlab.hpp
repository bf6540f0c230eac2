#pragma once

#include "ktlab/config.hpp"
#include "ktlab/data.hpp"
#include "ktlab/error.hpp"
#include "ktlab/experiments.hpp"
#include "ktlab/lrp.hpp"
#include "ktlab/model.hpp"
#include "ktlab/numkit.hpp"
#include "ktlab/parallel.hpp"
#include "ktlab/trainer.hpp"
