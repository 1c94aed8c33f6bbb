#include "uwb/sim.hpp"

int main() { return 0; }
