#pragma once

#include "ptq/common.hpp"
#include "ptq/survey.hpp"
#include "ptq/descriptives.hpp"
#include "ptq/timu.hpp"
#include "ptq/bvn.hpp"
#include "ptq/polychoric.hpp"
#include "ptq/factor.hpp"
#include "ptq/glm.hpp"
#include "ptq/synthetic.hpp"
#include "ptq/report.hpp"
