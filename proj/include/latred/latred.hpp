#pragma once

#include "latred/autodiff.hpp"
#include "latred/error.hpp"
#include "latred/expm.hpp"
#include "latred/factorization.hpp"
#include "latred/gauss_moves.hpp"
#include "latred/harness.hpp"
#include "latred/io.hpp"
#include "latred/lattice.hpp"
#include "latred/lll.hpp"
#include "latred/matrix.hpp"
#include "latred/number_theory.hpp"
#include "latred/policy.hpp"
#include "latred/random.hpp"
