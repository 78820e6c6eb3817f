#pragma once

#include "flybatt/aero.hpp"
#include "flybatt/commands.hpp"
#include "flybatt/control.hpp"
#include "flybatt/core.hpp"
#include "flybatt/docking.hpp"
#include "flybatt/dynamics.hpp"
#include "flybatt/endurance.hpp"
#include "flybatt/engine.hpp"
#include "flybatt/mission.hpp"
#include "flybatt/powertrain.hpp"
#include "flybatt/scenario.hpp"
#include "flybatt/telemetry.hpp"
