#include "doctest.h"

#include "uwb/estimators.hpp"
