#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace dlsn {

/// Dense V x V x N array indexed (i, j, t); row i is the sender, column j the receiver.
template <typename T>
class Cube {
 public:
  Cube() = default;
  Cube(std::size_t nodes, std::size_t times, T fill = T{})
      : nodes_(nodes), times_(times), data_(nodes * nodes * times, fill) {}

  std::size_t nodes() const { return nodes_; }
  std::size_t times() const { return times_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t i, std::size_t j, std::size_t t) { return data_[index(i, j, t)]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t t) const {
    return data_[index(i, j, t)];
  }

  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Cube&) const = default;

 private:
  std::size_t index(std::size_t i, std::size_t j, std::size_t t) const {
    return (t * nodes_ + i) * nodes_ + j;
  }

  std::size_t nodes_ = 0;
  std::size_t times_ = 0;
  std::vector<T> data_;
};

/// Visits every ordered off-diagonal cell (i, j, t).
template <typename F>
void for_each_dyad(std::size_t nodes, std::size_t times, F&& f) {
  for (std::size_t t = 0; t < times; ++t)
    for (std::size_t i = 0; i < nodes; ++i)
      for (std::size_t j = 0; j < nodes; ++j)
        if (i != j) f(i, j, t);
}

}  // namespace dlsn
