#pragma once

// Client library: sessions, the handle table, blocking and non-blocking
// access through views and memory datatypes.
//
// Counts are in units of the memory datatype (the view's etype by default);
// explicit offsets, positions and seeks are in etype units of the view.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "vipio/config.hpp"
#include "vipio/datatypes.hpp"
#include "vipio/layout.hpp"
#include "vipio/protocol.hpp"
#include "vipio/transport.hpp"
#include "vipio/viewdesc.hpp"

namespace vipio::client {

using Handle = int;
using net::NodeId;

enum class Whence : int { set = 0, cur = 1, end = 2 };

struct IoStatus {
  std::int64_t file_ref = -1;  // -1 while a non-blocking operation is unfinished
  std::uint64_t bytes = 0;
};

struct IoRequest {
  std::uint64_t id = 0;
  std::int64_t file_ref = -1;
};

// Dense integer handles. Capacity starts at 10 and grows by 5; freed
// slots are not reused until the last open entry is erased, which tears
// the table down.
template <class T>
class HandleTable {
 public:
  static constexpr std::size_t kInitial = 10;
  static constexpr std::size_t kGrowth = 5;

  Handle insert(T value) {
    if (capacity_ == 0) capacity_ = kInitial;
    if (next_ == capacity_) capacity_ += kGrowth;
    slots_.resize(capacity_);
    slots_[next_] = std::move(value);
    ++open_;
    return static_cast<Handle>(next_++);
  }

  T& at(Handle h) {
    if (h < 0 || static_cast<std::size_t>(h) >= next_ || !slots_[static_cast<std::size_t>(h)]) {
      throw Error(Errc::bad_handle, "handle " + std::to_string(h));
    }
    return *slots_[static_cast<std::size_t>(h)];
  }

  bool contains(Handle h) const {
    return h >= 0 && static_cast<std::size_t>(h) < next_ && slots_[static_cast<std::size_t>(h)].has_value();
  }

  void erase(Handle h) {
    at(h);
    slots_[static_cast<std::size_t>(h)].reset();
    if (--open_ == 0) {
      slots_.clear();
      capacity_ = 0;
      next_ = 0;
    }
  }

  std::size_t open_count() const { return open_; }
  std::size_t capacity() const { return capacity_; }

 private:
  std::vector<std::optional<T>> slots_;
  std::size_t capacity_ = 0;
  std::size_t next_ = 0;
  std::size_t open_ = 0;
};

struct ViewInfo {
  std::int64_t disp = 0;
  dt::BaseType etype = dt::kByte;
  view::AccessDesc desc;
  bool contiguous = true;
  bool is_set = false;
};

struct FileState {
  std::uint32_t file_id = 0;
  std::string name;
  std::uint32_t flags = 0;
  ViewInfo view;
  std::uint64_t position = 0;  // bytes of the view stream
  bool accessed = false;
};

struct Counters {
  std::uint64_t acks = 0;
  std::uint64_t datas = 0;
  std::uint64_t bytes = 0;
};

class Session {
 public:
  struct Options {
    std::chrono::milliseconds timeout{60000};
    std::optional<NodeId> preferred_buddy;
  };

  Session(net::Network& network, config::ClusterConfig cfg);
  Session(net::Network& network, config::ClusterConfig cfg, Options opts);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  // NoController for an unknown system id; Refused when the controller
  // declines.
  void connect(int system_id = 0);
  // Fails in-flight requests. NotConnected when already disconnected.
  void disconnect();
  bool connected() const { return connected_; }
  NodeId client_id() const { return id_; }
  NodeId buddy() const;

  Handle open(const std::string& name, std::uint32_t flags, const layout::FileHint* hint = nullptr);
  void close(Handle h);
  void remove(const std::string& name);
  void set_size(Handle h, std::uint64_t size);
  void preallocate(Handle h, std::uint64_t size);
  std::uint64_t get_size(Handle h);

  void set_view(Handle h, std::int64_t disp, dt::BaseType etype, const dt::Datatype& filetype,
                const std::string& datarep = "native");
  // Collective form: every member of `group` must pass the same etype.
  void set_view_all(Handle h, std::int64_t disp, dt::BaseType etype, const dt::Datatype& filetype,
                    const std::string& group, std::uint32_t members);
  // A view given directly as an access descriptor (e.g. a distribution's
  // process view); it has no datatype, so no etype check applies.
  void set_view(Handle h, std::int64_t disp, dt::BaseType etype, view::AccessDesc desc);
  const ViewInfo& view(Handle h);

  IoStatus read(Handle h, void* buf, std::int64_t count);
  IoStatus read(Handle h, void* buf, std::int64_t count, const dt::Datatype& memtype);
  IoStatus write(Handle h, const void* buf, std::int64_t count);
  IoStatus write(Handle h, const void* buf, std::int64_t count, const dt::Datatype& memtype);
  IoStatus read_at(Handle h, std::int64_t offset, void* buf, std::int64_t count);
  IoStatus read_at(Handle h, std::int64_t offset, void* buf, std::int64_t count, const dt::Datatype& memtype);
  IoStatus write_at(Handle h, std::int64_t offset, const void* buf, std::int64_t count);
  IoStatus write_at(Handle h, std::int64_t offset, const void* buf, std::int64_t count, const dt::Datatype& memtype);

  // Non-blocking forms advance the position by the requested amount when
  // issued, so overlapping operations take consecutive ranges in issue order.
  IoRequest iread(Handle h, void* buf, std::int64_t count);
  IoRequest iread(Handle h, void* buf, std::int64_t count, const dt::Datatype& memtype);
  IoRequest iwrite(Handle h, const void* buf, std::int64_t count);
  IoRequest iwrite(Handle h, const void* buf, std::int64_t count, const dt::Datatype& memtype);
  IoRequest iread_at(Handle h, std::int64_t offset, void* buf, std::int64_t count);
  IoRequest iwrite_at(Handle h, std::int64_t offset, const void* buf, std::int64_t count);
  // Status has file_ref -1 while unfinished.
  bool test(IoRequest& req, IoStatus& status);
  IoStatus wait(IoRequest& req);

  std::int64_t seek(Handle h, std::int64_t offset, Whence whence);
  std::int64_t seek(Handle h, std::int64_t offset, int whence);  // BadWhence
  std::int64_t get_position(Handle h);
  std::int64_t get_byte_offset(Handle h, std::int64_t offset);

  void set_atomicity(Handle h, bool atomic);
  bool get_atomicity(Handle h);
  void sync(Handle h);

  void barrier(const std::string& group, std::uint32_t members, std::uint8_t tag = 0);
  void hint_prefetch(const std::vector<std::string>& names);
  void hint_administration(NodeId server, std::uint32_t disk, double latency_ms_per_mib);
  std::string inspect(const std::string& name);
  void shutdown_cluster();

  Counters counters() const;
  void reset_counters();
  std::size_t open_files();
  std::size_t table_capacity();

  static std::int64_t get_count(const IoStatus& status, const dt::Datatype& type);

 private:
  struct Pending;
  struct AsyncOp;

  class Route;

  proto::Message rpc(NodeId to, proto::Message m);
  proto::Message make(proto::MsgType type, std::uint32_t file = 0) const;
  void require_connected() const;
  FileState& state(Handle h);

  std::uint64_t transfer_read(std::uint32_t file, Handle h, std::uint64_t offset, std::uint64_t length,
                              bool use_view, bool explicit_at, std::uint8_t* out);
  std::uint64_t transfer_write(std::uint32_t file, Handle h, std::uint64_t offset, std::uint64_t length,
                               bool use_view, bool explicit_at, const std::uint8_t* in);

  struct Plan {
    std::uint32_t file = 0;
    std::uint64_t offset = 0;
    std::uint64_t bytes = 0;
    bool use_view = false;
  };
  Plan plan(Handle h, std::uint64_t view_offset, std::int64_t count, const dt::Datatype& memtype, bool reading);
  IoStatus do_read(Handle h, const Plan& p, void* buf, std::int64_t count, const dt::Datatype& memtype,
                   bool explicit_at);
  IoStatus do_write(Handle h, const Plan& p, const void* buf, std::int64_t count, const dt::Datatype& memtype,
                    bool explicit_at);
  IoRequest submit(Handle h, std::function<IoStatus()> job);
  void install_view(Handle h, std::int64_t disp, dt::BaseType etype, view::AccessDesc desc, bool contiguous);
  std::uint64_t view_length(Handle h);

  void receive_loop();
  void executor_loop();

  net::Network& network_;
  config::ClusterConfig cfg_;
  Options opts_;
  NodeId id_;
  std::shared_ptr<net::Endpoint> ep_;
  std::atomic<bool> connected_{false};
  std::atomic<bool> closing_{false};
  NodeId buddy_ = 0;

  std::mutex mu_;
  HandleTable<FileState> table_;

  std::mutex route_mu_;
  std::map<std::uint32_t, std::shared_ptr<net::Mailbox>> routes_;
  std::atomic<std::uint32_t> next_request_{1};

  mutable std::mutex count_mu_;
  Counters counters_;

  std::mutex exec_mu_;
  std::condition_variable exec_cv_;
  std::deque<std::function<void()>> jobs_;
  std::map<std::uint64_t, std::shared_ptr<AsyncOp>> async_;
  std::uint64_t next_async_ = 1;
  bool exec_stop_ = false;

  std::thread receiver_;
  std::thread executor_;
};

// Runs a command file against a session, one operation per line:
//
//   open <name> <flag>[,<flag>...]        -> handle
//   close <h>
//   remove <name>
//   view <h> <disp> <etype> <filetype>    filetype in datatype text form
//   write <h> <count> <seed>              count etype units of pattern bytes
//   writeat <h> <offset> <count> <seed>
//   read <h> <count>                      -> bytes and FNV-1a checksum
//   readat <h> <offset> <count>
//   seek <h> <offset> set|cur|end
//   setsize <h> <bytes>
//   size <h>
//   sync <h>
//
// Flags: rdonly wronly rdwr create excl delete_on_close unique_open
// sequential append. Pattern byte i of a write is (seed * 131 + i * 7) mod 256.
// Returns the number of failed lines; each line's outcome goes to `out`.
int run_script(Session& s, std::istream& in, std::ostream& out);

std::uint32_t parse_flags(const std::string& text);
std::vector<std::uint8_t> pattern_bytes(std::uint64_t seed, std::uint64_t n);

}  // namespace vipio::client
