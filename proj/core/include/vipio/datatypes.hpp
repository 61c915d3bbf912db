#pragma once

// Recursive derived-datatype trees over a base element.
//
// Extents follow the access-descriptor convention: a type always starts at
// byte 0 of its own frame and ends where its farthest block ends (a block
// spans whole child extents), unless a Struct carries an explicit upper
// bound (the internal form of the LB/UB bracketing used by subarray and
// darray).

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vipio/error.hpp"

namespace vipio::dt {

enum class BaseKind : std::uint8_t {
  byte_, char_, short_, int_, long_, ushort_, uint_, ulong_, float_, double_
};

struct BaseType {
  BaseKind kind = BaseKind::byte_;

  std::int64_t extent() const;
  std::string_view name() const;
  static std::optional<BaseType> from_name(std::string_view name);

  friend bool operator==(const BaseType&, const BaseType&) = default;
};

inline constexpr BaseType kByte{BaseKind::byte_};
inline constexpr BaseType kChar{BaseKind::char_};
inline constexpr BaseType kShort{BaseKind::short_};
inline constexpr BaseType kInt{BaseKind::int_};
inline constexpr BaseType kLong{BaseKind::long_};
inline constexpr BaseType kUShort{BaseKind::ushort_};
inline constexpr BaseType kUInt{BaseKind::uint_};
inline constexpr BaseType kULong{BaseKind::ulong_};
inline constexpr BaseType kFloat{BaseKind::float_};
inline constexpr BaseType kDouble{BaseKind::double_};

enum class Order : std::uint8_t { c, fortran };

enum class DistKind : std::uint8_t { none, block, cyclic };
enum class DargMode : std::uint8_t { value, default_darg };

struct DimDistribution {
  DistKind kind = DistKind::none;
  DargMode mode = DargMode::default_darg;
  std::int64_t darg = 0;  // meaningful when mode == value

  static DimDistribution none() { return {}; }
  static DimDistribution block() { return {DistKind::block, DargMode::default_darg, 0}; }
  static DimDistribution block(std::int64_t n) { return {DistKind::block, DargMode::value, n}; }
  static DimDistribution cyclic() { return {DistKind::cyclic, DargMode::default_darg, 0}; }
  static DimDistribution cyclic(std::int64_t n) { return {DistKind::cyclic, DargMode::value, n}; }

  friend bool operator==(const DimDistribution&, const DimDistribution&) = default;
};

class Datatype;

struct Base { BaseType type; };
struct Contiguous { std::int64_t count; };
struct Vector { std::int64_t count, blocklen, stride_elems; };
struct HVector { std::int64_t count, blocklen, stride_bytes; };
struct Indexed { std::vector<std::int64_t> blocklens, displs_elems; };
struct HIndexed { std::vector<std::int64_t> blocklens, displs_bytes; };
struct Struct {
  std::vector<std::int64_t> blocklens, displs_bytes;
  std::optional<std::int64_t> upper_bound;
};
struct Subarray {
  std::vector<std::int64_t> sizes, subsizes, starts;
  Order order = Order::c;
};
struct Darray {
  std::int64_t size = 1, rank = 0;
  std::vector<std::int64_t> gsizes;
  std::vector<DimDistribution> distribs;
  std::vector<std::int64_t> psizes;
  Order order = Order::c;
};

using Node = std::variant<Base, Contiguous, Vector, HVector, Indexed, HIndexed, Struct, Subarray, Darray>;

// Immutable, cheaply copyable handle to a datatype tree.
class Datatype {
 public:
  Datatype(BaseType base);  // NOLINT: implicit by intent, `Datatype t = kInt;`

  static Datatype contiguous(std::int64_t count, Datatype child);
  static Datatype vector(std::int64_t count, std::int64_t blocklen, std::int64_t stride, Datatype child);
  static Datatype hvector(std::int64_t count, std::int64_t blocklen, std::int64_t stride_bytes, Datatype child);
  static Datatype indexed(std::vector<std::int64_t> blocklens, std::vector<std::int64_t> displs, Datatype child);
  static Datatype hindexed(std::vector<std::int64_t> blocklens, std::vector<std::int64_t> displs_bytes,
                           Datatype child);
  static Datatype structure(std::vector<std::int64_t> blocklens, std::vector<std::int64_t> displs_bytes,
                            std::vector<Datatype> children, std::optional<std::int64_t> upper_bound = {});
  static Datatype subarray(std::vector<std::int64_t> sizes, std::vector<std::int64_t> subsizes,
                           std::vector<std::int64_t> starts, Order order, Datatype child);
  static Datatype darray(std::int64_t size, std::int64_t rank, std::vector<std::int64_t> gsizes,
                         std::vector<DimDistribution> distribs, std::vector<std::int64_t> psizes, Order order,
                         Datatype child);

  const Node& node() const { return rep_->node; }
  // Single child for every node but Struct (per-block) and Base (none).
  const std::vector<Datatype>& children() const { return rep_->children; }
  const Datatype& child() const { return rep_->children.front(); }

  bool is_base() const { return std::holds_alternative<Base>(rep_->node); }
  BaseType base() const { return std::get<Base>(rep_->node).type; }

  // Bytes spanned by one instance (see header comment for the convention).
  std::int64_t extent() const;
  // Accessible bytes of one instance.
  std::int64_t size() const;

  friend bool operator==(const Datatype& a, const Datatype& b);

 private:
  struct Rep {
    Node node;
    std::vector<Datatype> children;
  };
  explicit Datatype(std::shared_ptr<const Rep> rep) : rep_(std::move(rep)) {}
  static Datatype make(Node node, std::vector<Datatype> children);

  std::shared_ptr<const Rep> rep_;
};

// Leaf base type. With `require_homogeneous`, all leaves must agree.
BaseType element_type_of(const Datatype& t, bool require_homogeneous = false);

// Checks the constructor argument rules; throws InvalidArguments.
void validate(const Datatype& t);

// Lowers to Base/Contiguous/HVector/HIndexed/Struct only.
Datatype normalize(const Datatype& t);

// Row-major process-grid coordinates of `rank`.
std::vector<std::int64_t> grid_coords(std::int64_t rank, const std::vector<std::int64_t>& psizes);

struct DimBlockParams {
  std::int64_t blksize = 0;
  std::int64_t count = 0;         // regular (full) blocks owned
  std::int64_t last_blksize = 0;  // size of the trailing irregular block, 0 if none
  std::int64_t my_size = 0;       // elements owned in this dimension
  std::int64_t start_offset = 0;  // first owned index, in elements
};

DimBlockParams darray_block_params(const DimDistribution& dist, std::int64_t gsize, std::int64_t nprocs,
                                   std::int64_t coord);

// Canonical text form, e.g. `vector(3,2,3;int)`.
std::string to_string(const Datatype& t);
Datatype parse_datatype(std::string_view text);

}  // namespace vipio::dt
