#include "lambdapack/store/big_matrix.hpp"

#include <algorithm>

#include "lambdapack/error.hpp"

namespace lambdapack::store {

BigMatrix::BigMatrix(std::string name_, std::size_t rows, std::size_t cols, std::size_t block_)
    : name(std::move(name_)), element_rows(rows), element_cols(cols), block(block_) {
  if (block == 0) throw ShapeError("block size must be at least 1");
  if (rows == 0 || cols == 0) throw ShapeError("matrix " + name + " has an empty dimension");
}

std::size_t BigMatrix::tile_rows(std::size_t i) const {
  if (i >= grid_rows()) throw ShapeError("tile row " + std::to_string(i) + " outside grid of " + name);
  return std::min(block, element_rows - i * block);
}

std::size_t BigMatrix::tile_cols(std::size_t j) const {
  if (j >= grid_cols()) throw ShapeError("tile column " + std::to_string(j) + " outside grid of " + name);
  return std::min(block, element_cols - j * block);
}

void BigMatrix::check_tile(std::size_t i, std::size_t j, const Tile& t) const {
  if (t.rows() != tile_rows(i) || t.cols() != tile_cols(j)) {
    throw ShapeError(name + "[" + std::to_string(i) + "," + std::to_string(j) + "] has shape " +
                     std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ", expected " +
                     std::to_string(tile_rows(i)) + "x" + std::to_string(tile_cols(j)));
  }
}

std::vector<GridTile> partition(const Tile& dense, std::size_t block) {
  BigMatrix shape("dense", dense.rows(), dense.cols(), block);
  std::vector<GridTile> out;
  out.reserve(shape.grid_rows() * shape.grid_cols());
  for (std::size_t i = 0; i < shape.grid_rows(); ++i)
    for (std::size_t j = 0; j < shape.grid_cols(); ++j)
      out.push_back({i, j, dense.block(i * block, j * block, shape.tile_rows(i), shape.tile_cols(j))});
  return out;
}

Tile assemble(const std::vector<std::vector<Tile>>& grid) {
  if (grid.empty() || grid[0].empty()) throw ShapeError("cannot assemble an empty grid");
  const std::size_t gc = grid[0].size();
  std::vector<std::size_t> heights, widths;
  for (const auto& row : grid) {
    if (row.size() != gc) throw ShapeError("ragged tile grid");
    heights.push_back(row[0].rows());
  }
  for (const auto& t : grid[0]) widths.push_back(t.cols());

  std::size_t rows = 0, cols = 0;
  for (auto h : heights) rows += h;
  for (auto w : widths) cols += w;
  Tile out(rows, cols);
  std::size_t r0 = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::size_t c0 = 0;
    for (std::size_t j = 0; j < gc; ++j) {
      const Tile& t = grid[i][j];
      if (t.rows() != heights[i] || t.cols() != widths[j]) {
        throw ShapeError("tile (" + std::to_string(i) + "," + std::to_string(j) + ") does not fit its grid row/column");
      }
      out.set_block(r0, c0, t);
      c0 += widths[j];
    }
    r0 += heights[i];
  }
  return out;
}

}  // namespace lambdapack::store
