#include "bmc/state.hpp"

#include <charconv>
#include <cstdlib>
#include <stdexcept>

namespace bmc {

StateId::StateId(std::initializer_list<std::int64_t> coords) {
  if (coords.size() == 0 || coords.size() > kMaxDim) {
    throw std::invalid_argument("StateId: dimension must be in 1.." + std::to_string(kMaxDim));
  }
  dim_ = static_cast<std::uint8_t>(coords.size());
  std::size_t i = 0;
  for (auto c : coords) coords_[i++] = c;
}

StateId StateId::origin(std::size_t dim) {
  if (dim == 0 || dim > kMaxDim) {
    throw std::invalid_argument("StateId: dimension must be in 1.." + std::to_string(kMaxDim));
  }
  StateId s;
  s.dim_ = static_cast<std::uint8_t>(dim);
  return s;
}

StateId StateId::unit(std::size_t dim, std::size_t axis, std::int64_t sign) {
  StateId s = origin(dim);
  if (axis >= dim) throw std::out_of_range("StateId::unit: axis out of range");
  s.coords_[axis] = sign;
  return s;
}

StateId StateId::parse(std::string_view text) {
  StateId s;
  std::size_t pos = 0;
  while (true) {
    auto comma = text.find(',', pos);
    auto part = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!part.empty() && (part.front() == ' ' || part.front() == '\t')) part.remove_prefix(1);
    while (!part.empty() && (part.back() == ' ' || part.back() == '\t')) part.remove_suffix(1);
    if (part.empty()) throw std::invalid_argument("StateId: malformed state '" + std::string(text) + "'");
    if (s.dim_ == kMaxDim) throw std::invalid_argument("StateId: too many components in '" + std::string(text) + "'");
    if (part.front() == '+') part.remove_prefix(1);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw std::invalid_argument("StateId: malformed state '" + std::string(text) + "'");
    }
    s.coords_[s.dim_++] = v;
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return s;
}

StateId StateId::operator+(const StateId& other) const {
  if (dim_ != other.dim_) throw std::invalid_argument("StateId: dimension mismatch");
  StateId r = *this;
  for (std::size_t i = 0; i < dim_; ++i) r.coords_[i] += other.coords_[i];
  return r;
}

StateId StateId::operator-(const StateId& other) const {
  if (dim_ != other.dim_) throw std::invalid_argument("StateId: dimension mismatch");
  StateId r = *this;
  for (std::size_t i = 0; i < dim_; ++i) r.coords_[i] -= other.coords_[i];
  return r;
}

std::string StateId::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < dim_; ++i) {
    if (i) out += ',';
    out += std::to_string(coords_[i]);
  }
  return out;
}

std::size_t StateHash::operator()(const StateId& s) const noexcept {
  // splitmix64 finalizer folded over the coordinates
  std::uint64_t h = 0x9E3779B97F4A7C15ULL * (s.dim() + 1);
  for (std::size_t i = 0; i < s.dim(); ++i) {
    h ^= static_cast<std::uint64_t>(s[i]) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    h ^= h >> 30;
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 27;
    h *= 0x94D049BB133111EBULL;
    h ^= h >> 31;
  }
  return static_cast<std::size_t>(h);
}

std::int64_t l1_norm(const StateId& s) {
  std::int64_t n = 0;
  for (std::size_t i = 0; i < s.dim(); ++i) n += std::llabs(s[i]);
  return n;
}

}  // namespace bmc
