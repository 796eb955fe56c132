#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace fk {

// Dense boolean matrix, rows packed into 64-bit words (bit j of row i is
// column j).
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), words_((cols + 63) / 64), bits_(rows * words_, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t words() const { return words_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  bool get(std::size_t i, std::size_t j) const { return (bits_[i * words_ + j / 64] >> (j % 64)) & 1u; }
  void set(std::size_t i, std::size_t j, bool v = true) {
    const std::uint64_t m = std::uint64_t{1} << (j % 64);
    auto& w = bits_[i * words_ + j / 64];
    w = v ? (w | m) : (w & ~m);
  }

  const std::uint64_t* row(std::size_t i) const { return bits_.data() + i * words_; }
  std::uint64_t* row(std::size_t i) { return bits_.data() + i * words_; }

  // Smallest set column >= from in row i, or cols() when there is none.
  std::size_t next_set(std::size_t i, std::size_t from) const {
    if (from >= cols_) return cols_;
    const std::uint64_t* r = row(i);
    std::size_t w = from / 64;
    std::uint64_t word = r[w] & (~std::uint64_t{0} << (from % 64));
    while (true) {
      if (word) {
        const std::size_t j = w * 64 + static_cast<std::size_t>(std::countr_zero(word));
        return j < cols_ ? j : cols_;
      }
      if (++w == words_) return cols_;
      word = r[w];
    }
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : bits_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  BitMatrix transposed() const {
    BitMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = next_set(i, 0); j < cols_; j = next_set(i, j + 1)) t.set(j, i);
    return t;
  }

  // Copy padded with all-false rows/columns to n x n.
  BitMatrix padded(std::size_t n) const {
    BitMatrix p(n, n);
    for (std::size_t i = 0; i < rows_ && i < n; ++i)
      for (std::size_t j = next_set(i, 0); j < cols_ && j < n; j = next_set(i, j + 1)) p.set(i, j);
    return p;
  }

  bool operator==(const BitMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

}  // namespace fk
