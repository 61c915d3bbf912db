#include "vipio/error.hpp"

namespace vipio {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ok: return "Ok";
    case Errc::out_of_view: return "OutOfView";
    case Errc::not_readable: return "NotReadable";
    case Errc::not_writable: return "NotWritable";
    case Errc::exhausted: return "Exhausted";
    case Errc::buffer_too_short: return "BufferTooShort";
    case Errc::record_size_mismatch: return "RecordSizeMismatch";
    case Errc::index_beyond_file: return "IndexBeyondFile";
    case Errc::position_beyond_file: return "PositionBeyondFile";
    case Errc::heterogeneous_leaves: return "HeterogeneousLeaves";
    case Errc::invalid_arguments: return "InvalidArguments";
    case Errc::rank_out_of_range: return "RankOutOfRange";
    case Errc::etype_mismatch: return "EtypeMismatch";
    case Errc::not_aligned: return "NotAligned";
    case Errc::unsupported_representation: return "UnsupportedRepresentation";
    case Errc::malformed_descriptor: return "MalformedDescriptor";
    case Errc::unsupported_distribution: return "UnsupportedDistribution";
    case Errc::local_length_mismatch: return "LocalLengthMismatch";
    case Errc::bad_magic: return "BadMagic";
    case Errc::truncated: return "Truncated";
    case Errc::unknown_type: return "UnknownType";
    case Errc::unknown_file: return "UnknownFile";
    case Errc::exists: return "Exists";
    case Errc::no_such_file: return "NoSuchFile";
    case Errc::mode_conflict: return "ModeConflict";
    case Errc::io_failure: return "IOFailure";
    case Errc::not_controller: return "NotController";
    case Errc::no_controller: return "NoController";
    case Errc::refused: return "Refused";
    case Errc::bad_handle: return "BadHandle";
    case Errc::bad_whence: return "BadWhence";
    case Errc::unknown_request: return "UnknownRequest";
    case Errc::unfinished_request: return "UnfinishedRequest";
    case Errc::unsupported: return "Unsupported";
    case Errc::not_connected: return "NotConnected";
    case Errc::config_error: return "ConfigError";
    case Errc::timeout: return "Timeout";
  }
  return "Unknown";
}

}  // namespace vipio
