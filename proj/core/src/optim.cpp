// Adam lives in the header; this TU keeps the target layout uniform.
#include "kinvar/optim.hpp"
