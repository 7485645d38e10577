#pragma once

#include "cdfreg/core.hpp"
#include "cdfreg/measure.hpp"
#include "cdfreg/basis.hpp"
#include "cdfreg/rng.hpp"
#include "cdfreg/gram.hpp"
#include "cdfreg/estimators.hpp"
#include "cdfreg/bounds.hpp"
#include "cdfreg/synth.hpp"
#include "cdfreg/realdata.hpp"
#include "cdfreg/io.hpp"
