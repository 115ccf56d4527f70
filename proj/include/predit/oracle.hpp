#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>

#include "predit/error.hpp"
#include "predit/vector_ops.hpp"

namespace predit {

/// A counting wrapper around an expensive field f(x, t).
///
/// Every call is counted, including calls whose callable throws. Not
/// copyable: a copy would split the counter.
class OracleHandle {
 public:
  using Fn = std::function<Vector(std::span<const double>, double)>;

  OracleHandle(std::size_t dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {
    if (dim == 0) throw DimensionError("oracle dimension must be positive");
    if (!fn_) throw ConfigError("oracle callable is empty");
  }

  OracleHandle(const OracleHandle&) = delete;
  OracleHandle& operator=(const OracleHandle&) = delete;
  OracleHandle(OracleHandle&&) noexcept = default;
  OracleHandle& operator=(OracleHandle&&) noexcept = default;

  Vector operator()(std::span<const double> x, double t) {
    if (x.size() != dim_) {
      throw DimensionError("oracle expects dimension " + std::to_string(dim_) + ", got " +
                           std::to_string(x.size()));
    }
    ++calls_;
    Vector out = fn_(x, t);
    if (out.size() != dim_) {
      throw DimensionError("oracle returned dimension " + std::to_string(out.size()) +
                           ", expected " + std::to_string(dim_));
    }
    return out;
  }

  std::size_t calls() const noexcept { return calls_; }
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::size_t dim_;
  Fn fn_;
  std::size_t calls_ = 0;
};

}  // namespace predit
