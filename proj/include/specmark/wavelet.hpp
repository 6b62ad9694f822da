#pragma once

#include <cstddef>

#include "specmark/errors.hpp"
#include "specmark/matrix.hpp"

namespace specmark {

// One level of the 2D orthonormal Haar transform. Sub-band orientation
// convention: LH holds row-pair differences (vertical / frequency-direction
// detail), HL column-pair differences, HH the diagonal residue.
struct SubBands {
  Matrix ll, lh, hl, hh;
  std::size_t orig_rows = 0;  // pre-padding shape, so idwt2 can strip
  std::size_t orig_cols = 0;
};

enum class Band { LL, LH, HL, HH };

inline Matrix& band_of(SubBands& b, Band which) {
  switch (which) {
    case Band::LL: return b.ll;
    case Band::LH: return b.lh;
    case Band::HL: return b.hl;
    default: return b.hh;
  }
}
inline const Matrix& band_of(const SubBands& b, Band which) {
  switch (which) {
    case Band::LL: return b.ll;
    case Band::LH: return b.lh;
    case Band::HL: return b.hl;
    default: return b.hh;
  }
}

// Odd dimensions are edge-replicated to even before the transform; the
// original shape is recorded so the inverse can crop back.
inline SubBands dwt2(const Matrix& x) {
  if (x.rows() < 2 || x.cols() < 2) throw InputTooSmall("dwt2: need at least 2x2");
  const std::size_t pr = x.rows() + (x.rows() & 1u);
  const std::size_t pc = x.cols() + (x.cols() & 1u);
  const std::size_t hr = pr / 2, hc = pc / 2;

  SubBands out;
  out.orig_rows = x.rows();
  out.orig_cols = x.cols();
  out.ll = Matrix(hr, hc);
  out.lh = Matrix(hr, hc);
  out.hl = Matrix(hr, hc);
  out.hh = Matrix(hr, hc);

  auto at = [&](std::size_t r, std::size_t c) {
    if (r >= x.rows()) r = x.rows() - 1;
    if (c >= x.cols()) c = x.cols() - 1;
    return x(r, c);
  };

  for (std::size_t i = 0; i < hr; ++i) {
    for (std::size_t j = 0; j < hc; ++j) {
      const double a = at(2 * i, 2 * j);
      const double b = at(2 * i, 2 * j + 1);
      const double c = at(2 * i + 1, 2 * j);
      const double d = at(2 * i + 1, 2 * j + 1);
      out.ll(i, j) = (a + b + c + d) * 0.5;
      out.lh(i, j) = (a + b - c - d) * 0.5;
      out.hl(i, j) = (a - b + c - d) * 0.5;
      out.hh(i, j) = (a - b - c + d) * 0.5;
    }
  }
  return out;
}

inline Matrix idwt2(const SubBands& b) {
  if (!b.ll.same_shape(b.lh) || !b.ll.same_shape(b.hl) || !b.ll.same_shape(b.hh))
    throw ShapeError("idwt2: sub-band shapes differ");
  const std::size_t hr = b.ll.rows(), hc = b.ll.cols();
  std::size_t rows = b.orig_rows ? b.orig_rows : 2 * hr;
  std::size_t cols = b.orig_cols ? b.orig_cols : 2 * hc;
  if (rows > 2 * hr || cols > 2 * hc || rows + 1 < 2 * hr || cols + 1 < 2 * hc)
    throw ShapeError("idwt2: recorded original shape inconsistent with sub-bands");

  Matrix x(rows, cols);
  for (std::size_t i = 0; i < hr; ++i) {
    for (std::size_t j = 0; j < hc; ++j) {
      const double ll = b.ll(i, j), lh = b.lh(i, j), hl = b.hl(i, j), hh = b.hh(i, j);
      const double a = (ll + lh + hl + hh) * 0.5;
      const double bb = (ll + lh - hl - hh) * 0.5;
      const double c = (ll - lh + hl - hh) * 0.5;
      const double d = (ll - lh - hl + hh) * 0.5;
      const std::size_t r0 = 2 * i, c0 = 2 * j;
      if (r0 < rows && c0 < cols) x(r0, c0) = a;
      if (r0 < rows && c0 + 1 < cols) x(r0, c0 + 1) = bb;
      if (r0 + 1 < rows && c0 < cols) x(r0 + 1, c0) = c;
      if (r0 + 1 < rows && c0 + 1 < cols) x(r0 + 1, c0 + 1) = d;
    }
  }
  return x;
}

}  // namespace specmark
