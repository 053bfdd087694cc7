#pragma once

#include "ecgpcac/errors.hpp"
#include "ecgpcac/fdist.hpp"
#include "ecgpcac/plant.hpp"
#include "ecgpcac/rls.hpp"
#include "ecgpcac/qp.hpp"
#include "ecgpcac/mpc.hpp"
#include "ecgpcac/ecg.hpp"
#include "ecgpcac/scenario.hpp"
#include "ecgpcac/config.hpp"
#include "ecgpcac/log_io.hpp"
