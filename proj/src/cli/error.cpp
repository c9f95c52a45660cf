#include "cuneiform/error.hpp"

namespace cuneiform {

int exit_code(const Error& e) noexcept {
  if (dynamic_cast<const VerificationError*>(&e)) return 5;
  if (dynamic_cast<const TrainingError*>(&e)) return 4;
  if (dynamic_cast<const IoError*>(&e)) return 3;
  // config, structural, input and bounds problems
  return 2;
}

}  // namespace cuneiform
