#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace bmc {

inline constexpr std::size_t kMaxDim = 4;

/// A state of the countable space X. Lattice states are integer vectors of
/// dimension 1..kMaxDim; custom kernels use the same encoding ("i" or "i,j").
class StateId {
 public:
  StateId() = default;
  StateId(std::initializer_list<std::int64_t> coords);

  static StateId origin(std::size_t dim);
  static StateId unit(std::size_t dim, std::size_t axis, std::int64_t sign = 1);

  /// Parses "i", "i,j", ... (whitespace around components is ignored).
  static StateId parse(std::string_view text);

  std::size_t dim() const { return dim_; }
  std::int64_t operator[](std::size_t i) const { return coords_[i]; }
  std::int64_t& operator[](std::size_t i) { return coords_[i]; }

  StateId operator+(const StateId& other) const;
  StateId operator-(const StateId& other) const;

  std::string to_string() const;

  friend auto operator<=>(const StateId&, const StateId&) = default;
  friend bool operator==(const StateId&, const StateId&) = default;

 private:
  // Unused trailing coordinates stay zero so defaulted comparison is sound.
  std::uint8_t dim_ = 0;
  std::array<std::int64_t, kMaxDim> coords_{};
};

struct StateHash {
  std::size_t operator()(const StateId& s) const noexcept;
};

std::int64_t l1_norm(const StateId& s);

}  // namespace bmc
