#pragma once

// Umbrella header for the whole library.

#include "ssmgd/bounds.hpp"
#include "ssmgd/chain.hpp"
#include "ssmgd/config.hpp"
#include "ssmgd/descent.hpp"
#include "ssmgd/errors.hpp"
#include "ssmgd/lemma_audit.hpp"
#include "ssmgd/mixing.hpp"
#include "ssmgd/montecarlo.hpp"
#include "ssmgd/oracle.hpp"
#include "ssmgd/rng.hpp"
