#pragma once

#include "qg2l/config.hpp"
#include "qg2l/diagnostics.hpp"
#include "qg2l/errors.hpp"
#include "qg2l/experiments.hpp"
#include "qg2l/params.hpp"
#include "qg2l/qg_dynamics.hpp"
#include "qg2l/snapshot.hpp"
#include "qg2l/spectral.hpp"
#include "qg2l/stationary_solver.hpp"
#include "qg2l/time_integration.hpp"
#include "qg2l/transport_noise.hpp"
