#pragma once

#include "qkdids/rng.hpp"
#include "qkdids/parallel.hpp"
#include "qkdids/counts.hpp"
#include "qkdids/physics.hpp"
#include "qkdids/finite_key.hpp"
#include "qkdids/attack.hpp"
#include "qkdids/simulator.hpp"
#include "qkdids/telemetry.hpp"
#include "qkdids/defender.hpp"
#include "qkdids/adversary.hpp"
#include "qkdids/metrics.hpp"
#include "qkdids/trainer.hpp"
#include "qkdids/io.hpp"
