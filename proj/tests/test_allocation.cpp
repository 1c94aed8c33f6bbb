#include "doctest.h"

#include "uwb/allocation.hpp"
