#pragma once

#include "nbocs/annealer.hpp"
#include "nbocs/configuration.hpp"
#include "nbocs/harness.hpp"
#include "nbocs/io.hpp"
#include "nbocs/metrics.hpp"
#include "nbocs/optimizer.hpp"
#include "nbocs/rng.hpp"
#include "nbocs/sk_model.hpp"
#include "nbocs/surrogate.hpp"
#include "nbocs/trace.hpp"
