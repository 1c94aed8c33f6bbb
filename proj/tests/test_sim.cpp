#include "doctest.h"

#include "uwb/sim.hpp"
