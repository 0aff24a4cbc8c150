#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reasoner {

enum class Errc {
  invalid_argument,
  shape_mismatch,
  non_finite,
  tape_consumed,
  // bundle loading
  bad_magic,
  truncated,
  checksum_mismatch,
  shape_incompatible,
  // problem compilation
  invalid_spec,
  unknown_bundle,
  dangling_reference,
  not_probabilities,
  index_out_of_bounds,
  // inference
  divergence,
  io,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace reasoner
