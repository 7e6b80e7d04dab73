#pragma once

#include "quadrature.hpp"
#include "mesh.hpp"
#include "polybasis.hpp"
#include "sparse.hpp"
#include "wgspace.hpp"
#include "linalg.hpp"
#include "augsub.hpp"
#include "experiment.hpp"
