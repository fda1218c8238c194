#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lambdapack/tile.hpp"

namespace lambdapack::store {

/// A dense matrix stored as a grid of block×block tiles; the last tile row
/// and column are ragged when the block does not divide the dimension.
struct BigMatrix {
  std::string name;
  std::size_t element_rows = 0;
  std::size_t element_cols = 0;
  std::size_t block = 0;

  BigMatrix(std::string name, std::size_t rows, std::size_t cols, std::size_t block);

  std::size_t grid_rows() const { return (element_rows + block - 1) / block; }
  std::size_t grid_cols() const { return (element_cols + block - 1) / block; }
  std::size_t tile_rows(std::size_t i) const;
  std::size_t tile_cols(std::size_t j) const;

  /// Throws ShapeError unless `t` has the shape expected at grid position (i, j).
  void check_tile(std::size_t i, std::size_t j, const Tile& t) const;
};

struct GridTile {
  std::size_t i = 0;
  std::size_t j = 0;
  Tile tile;
};

/// Row-major list of the tiles of `dense`.
std::vector<GridTile> partition(const Tile& dense, std::size_t block);

/// Inverse of partition. Tiles in a grid row must agree on height and tiles in
/// a grid column on width; anything else is a ShapeError.
Tile assemble(const std::vector<std::vector<Tile>>& grid);

}  // namespace lambdapack::store
