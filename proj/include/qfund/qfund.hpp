#pragma once

#include "qfund/derivation.hpp"
#include "qfund/equilibrium.hpp"
#include "qfund/errors.hpp"
#include "qfund/mechanism.hpp"
#include "qfund/preferences.hpp"
#include "qfund/runner.hpp"
#include "qfund/scenario.hpp"
#include "qfund/version.hpp"
