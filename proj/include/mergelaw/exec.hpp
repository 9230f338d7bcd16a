#pragma once

namespace mergelaw {

// Serial runs the plain reference loops; Parallel runs the OpenMP kernels.
// Both produce bit-identical results.
enum class Exec { Serial, Parallel };

}  // namespace mergelaw
