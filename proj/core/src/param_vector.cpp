// ParamVector is header-only today; this TU anchors the target and will hold
// any out-of-line pieces that grow later.
#include "kinvar/param_vector.hpp"
