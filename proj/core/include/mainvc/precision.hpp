#pragma once

// Scalar type of the differentiable core. The library is built twice: the
// default 32-bit build used for training and inference, and a 64-bit build
// (MAINVC_DOUBLE) used by gradient checks. Each build lives in its own inline
// namespace so both can be linked into one executable.

#if defined(MAINVC_DOUBLE)
#define MAINVC_PRECISION_NS f64
#else
#define MAINVC_PRECISION_NS f32
#endif

#define MAINVC_NAMESPACE_BEGIN \
  namespace mainvc {           \
  inline namespace MAINVC_PRECISION_NS {
#define MAINVC_NAMESPACE_END \
  }                          \
  }

MAINVC_NAMESPACE_BEGIN

#if defined(MAINVC_DOUBLE)
using Scalar = double;
#else
using Scalar = float;
#endif

MAINVC_NAMESPACE_END
