#pragma once

#include "errors.hpp"
#include "parallel.hpp"
#include "special.hpp"
#include "model.hpp"
#include "derivatives.hpp"
#include "quadrature.hpp"
#include "mixture.hpp"
#include "fisher.hpp"
#include "identity.hpp"
#include "estimator.hpp"
#include "csv.hpp"
#include "verify.hpp"
#include "report.hpp"
