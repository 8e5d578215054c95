#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace poisbound {

inline constexpr int kMaxDim = 4;

// A point of Z_+^d with d <= kMaxDim. Unused trailing coordinates stay 0.
struct State {
  std::array<int, kMaxDim> coord{};
  int dim = 1;

  State() = default;
  State(std::initializer_list<int> xs);
  static State of(std::span<const int> xs);

  int operator[](int i) const { return coord[static_cast<std::size_t>(i)]; }
  int& operator[](int i) { return coord[static_cast<std::size_t>(i)]; }

  friend bool operator==(const State&, const State&) = default;
  friend auto operator<=>(const State&, const State&) = default;
};

std::string to_string(const State& x);
// Inverse of to_string: "3" or "3:4".
State parse_state(const std::string& text);

using StateFn = std::function<double(const State&)>;

// Lexicographic dense indexing of the box {0..upper[0]} x ... x {0..upper[d-1]}.
class StateCoder {
 public:
  StateCoder() = default;
  explicit StateCoder(std::vector<int> upper);

  int dimension() const { return static_cast<int>(upper_.size()); }
  const std::vector<int>& upper() const { return upper_; }
  std::size_t size() const { return size_; }

  bool contains(const State& x) const;
  std::size_t encode(const State& x) const;
  State decode(std::size_t index) const;
  // Nearest point of the box (coordinate-wise clamp).
  State clamp(const State& x) const;

 private:
  std::vector<int> upper_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 0;
};

// Finite set of states in encoder order, with O(1) membership lookup through
// a dense table over the bounding box.
class StateSet {
 public:
  StateSet() = default;
  explicit StateSet(std::vector<State> states);

  static StateSet box(const std::vector<int>& upper);
  static StateSet filter(const std::vector<int>& upper, const std::function<bool(const State&)>& keep);

  std::size_t size() const { return states_.size(); }
  bool empty() const { return states_.empty(); }
  bool contains(const State& x) const { return index_of(x) >= 0; }
  // Position in encoder order, or -1.
  long index_of(const State& x) const;

  const std::vector<State>& states() const { return states_; }
  auto begin() const { return states_.begin(); }
  auto end() const { return states_.end(); }
  const State& operator[](std::size_t i) const { return states_[i]; }

  int dimension() const { return states_.empty() ? 0 : states_.front().dim; }
  // Componentwise maximum over the set.
  std::vector<int> upper_corner() const;

  StateSet with(const State& x) const;
  StateSet without(const State& x) const;
  bool is_subset_of(const StateSet& other) const;

 private:
  std::vector<State> states_;
  StateCoder bbox_;
  std::vector<long> lookup_;
};

}  // namespace poisbound
