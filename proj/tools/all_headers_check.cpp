#include "gpsobol/design.hpp"
#include "gpsobol/errors.hpp"
#include "gpsobol/functions.hpp"
#include "gpsobol/gp_path.hpp"
#include "gpsobol/kernel.hpp"
#include "gpsobol/kriging.hpp"
#include "gpsobol/kriging_sobol.hpp"
#include "gpsobol/multifidelity.hpp"
#include "gpsobol/optim.hpp"
#include "gpsobol/parallel.hpp"
#include "gpsobol/rng.hpp"
#include "gpsobol/serialize.hpp"
#include "gpsobol/sobol_mc.hpp"

int main() { return 0; }
