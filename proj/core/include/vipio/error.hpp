#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vipio {

// Every failure surfaced by the library carries one of these codes. The
// same numeric values travel as negative ACK status on the wire.
enum class Errc : int {
  ok = 0,
  // file model
  out_of_view = 1,
  not_readable,
  not_writable,
  exhausted,
  buffer_too_short,
  record_size_mismatch,
  index_beyond_file,
  position_beyond_file,
  // datatypes / views
  heterogeneous_leaves,
  invalid_arguments,
  rank_out_of_range,
  etype_mismatch,
  not_aligned,
  unsupported_representation,
  // distribution
  malformed_descriptor,
  unsupported_distribution,
  local_length_mismatch,
  // protocol
  bad_magic,
  truncated,
  unknown_type,
  // server
  unknown_file,
  exists,
  no_such_file,
  mode_conflict,
  io_failure,
  not_controller,
  // client
  no_controller,
  refused,
  bad_handle,
  bad_whence,
  unknown_request,
  unfinished_request,
  unsupported,
  not_connected,
  // harness
  config_error,
  timeout,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  explicit Error(Errc code) : std::runtime_error(std::string(errc_name(code))), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace vipio
