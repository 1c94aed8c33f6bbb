#include "doctest.h"

#include "uwb/cli.hpp"
