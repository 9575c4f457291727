#ifndef LSE_LSE_HPP
#define LSE_LSE_HPP

#include "lse/errors.hpp"
#include "lse/harness.hpp"
#include "lse/inference.hpp"
#include "lse/kernel.hpp"
#include "lse/manifest.hpp"
#include "lse/matrix_io.hpp"
#include "lse/metrics.hpp"
#include "lse/model.hpp"
#include "lse/synthetic.hpp"
#include "lse/types.hpp"

#endif  // LSE_LSE_HPP
