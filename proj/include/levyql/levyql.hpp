#pragma once

#include "levyql/asymptotics.hpp"
#include "levyql/avar.hpp"
#include "levyql/errors.hpp"
#include "levyql/estimator.hpp"
#include "levyql/gql.hpp"
#include "levyql/harness.hpp"
#include "levyql/io.hpp"
#include "levyql/levy_driver.hpp"
#include "levyql/model.hpp"
#include "levyql/random.hpp"
#include "levyql/simulate.hpp"
#include "levyql/stats.hpp"
#include "levyql/version.hpp"
