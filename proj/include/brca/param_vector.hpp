/*
 * Copyright 2026 The BRCA-Sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "brca/error.hpp"

namespace brca {

struct Block {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const Block&, const Block&) = default;
};

// Ordered, contiguous block layout of a flat parameter vector.
class Layout {
 public:
  Layout() = default;

  /// Builds a contiguous layout from (name, length) pairs.
  explicit Layout(const std::vector<std::pair<std::string, std::size_t>>& blocks) {
    std::size_t offset = 0;
    for (const auto& [name, length] : blocks) {
      if (find(name) != nullptr) throw InvalidArgument("duplicate block name: " + name);
      blocks_.push_back({name, offset, length});
      offset += length;
    }
    size_ = offset;
  }

  std::size_t size() const noexcept { return size_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }

  const Block* find(const std::string& name) const noexcept {
    auto it = std::find_if(blocks_.begin(), blocks_.end(),
                           [&](const Block& b) { return b.name == name; });
    return it == blocks_.end() ? nullptr : &*it;
  }

  const Block& at(const std::string& name) const {
    const Block* b = find(name);
    if (b == nullptr) throw InvalidArgument("no block named '" + name + "'");
    return *b;
  }

  friend bool operator==(const Layout& a, const Layout& b) {
    return a.size_ == b.size_ && a.blocks_ == b.blocks_;
  }

 private:
  std::vector<Block> blocks_;
  std::size_t size_ = 0;
};

// Flat model parameters plus their named block layout. The layout is shared
// between copies; values are owned.
class ParamVector {
 public:
  ParamVector() : layout_(std::make_shared<const Layout>()) {}

  explicit ParamVector(std::shared_ptr<const Layout> layout)
      : layout_(std::move(layout)), values_(layout_->size(), 0.0) {}

  ParamVector(std::shared_ptr<const Layout> layout, std::vector<double> values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_->size()) {
      throw DimensionMismatch("parameter count " + std::to_string(values_.size()) +
                              " does not match layout size " +
                              std::to_string(layout_->size()));
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  const Layout& layout() const noexcept { return *layout_; }
  const std::shared_ptr<const Layout>& shared_layout() const noexcept { return layout_; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  std::span<double> block(const std::string& name) {
    const Block& b = layout_->at(name);
    return std::span<double>(values_).subspan(b.offset, b.length);
  }
  std::span<const double> block(const std::string& name) const {
    const Block& b = layout_->at(name);
    return std::span<const double>(values_).subspan(b.offset, b.length);
  }

  bool same_layout(const ParamVector& other) const noexcept {
    return layout_ == other.layout_ || *layout_ == *other.layout_;
  }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  ParamVector zeros_like() const { return ParamVector(layout_); }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.same_layout(b) && a.values_ == b.values_;
  }

 private:
  std::shared_ptr<const Layout> layout_;
  std::vector<double> values_;
};

inline void require_same_layout(const ParamVector& a, const ParamVector& b) {
  if (!a.same_layout(b)) throw DimensionMismatch("parameter layouts differ");
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// ceil(fraction * n) with a small guard so that 0.2 * 10 stays 2.
inline std::size_t ceil_count(double fraction, std::size_t n) {
  const double x = fraction * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

}  // namespace brca
