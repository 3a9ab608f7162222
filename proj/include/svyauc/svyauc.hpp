#pragma once

#include "svyauc/error.hpp"
#include "svyauc/inference.hpp"
#include "svyauc/normal.hpp"
#include "svyauc/replicates.hpp"
#include "svyauc/rng.hpp"
#include "svyauc/simgen.hpp"
#include "svyauc/survey_frame.hpp"
#include "svyauc/wauc.hpp"
#include "svyauc/wlogit.hpp"
