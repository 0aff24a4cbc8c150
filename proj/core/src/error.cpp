#include "reasoner/error.hpp"

namespace reasoner {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::non_finite: return "non-finite value";
    case Errc::tape_consumed: return "tape already consumed";
    case Errc::bad_magic: return "bad magic";
    case Errc::truncated: return "truncated data";
    case Errc::checksum_mismatch: return "checksum mismatch";
    case Errc::shape_incompatible: return "shape incompatibility";
    case Errc::invalid_spec: return "invalid problem spec";
    case Errc::unknown_bundle: return "unknown bundle";
    case Errc::dangling_reference: return "dangling reference";
    case Errc::not_probabilities: return "input is not a probability vector";
    case Errc::index_out_of_bounds: return "index out of bounds";
    case Errc::divergence: return "divergence";
    case Errc::io: return "i/o failure";
  }
  return "unknown error";
}

}  // namespace reasoner
