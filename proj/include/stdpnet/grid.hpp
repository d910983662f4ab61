#pragma once

#include <cstddef>
#include <vector>

namespace stdpnet {

// Row-major 2-D array.
template <class T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int r, int c, T fill = T{})
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  bool operator==(const Grid&) const = default;
};

}  // namespace stdpnet
