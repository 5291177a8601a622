#pragma once

// Library headers, without the experiment harness (jacspec/harness/*.hpp),
// which pulls in the TOML, JSON and CLI parsers.

#include "jacspec/conditions.hpp"
#include "jacspec/dense_matrix.hpp"
#include "jacspec/diagnostics.hpp"
#include "jacspec/ensembles.hpp"
#include "jacspec/error.hpp"
#include "jacspec/mask.hpp"
#include "jacspec/matrix_io.hpp"
#include "jacspec/network.hpp"
#include "jacspec/pruning.hpp"
#include "jacspec/rng.hpp"
#include "jacspec/scaled_product.hpp"
#include "jacspec/special_functions.hpp"
#include "jacspec/spectral.hpp"
#include "jacspec/streams.hpp"
