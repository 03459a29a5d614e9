/**
 * @file lislam.hpp
 * @brief Umbrella header.
 */
#pragma once

#include "lislam/lie_group.hpp"
#include "lislam/slam_system.hpp"
#include "lislam/observer.hpp"
#include "lislam/gain_design.hpp"
#include "lislam/metrics.hpp"
#include "lislam/harness.hpp"
#include "lislam/config.hpp"
#include "lislam/selftest.hpp"
