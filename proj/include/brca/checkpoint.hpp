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

// Binary checkpoints for models and detectors. Layout (all integers and
// doubles little-endian):
//
//   magic      8 bytes   "BRCAMDL1" (model) or "BRCADET1" (detector)
//   kind       u32       0 logistic-regression, 1 mlp-classifier, 2 mlp-autoencoder
//   activation u32       0 relu, 1 tanh
//   input_dim  u64
//   output_dim u64
//   n_hidden   u64, then n_hidden x u64 hidden widths
//   probe      u64 length, then that many bytes of block name
//   [detector only] adapt_count u64, lr f64
//   n_params   u64, then n_params x f64

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "brca/aadm.hpp"
#include "brca/error.hpp"
#include "brca/model.hpp"

namespace brca::checkpoint {

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 8);
}
inline void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 4);
}
inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw InvalidArgument("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw InvalidArgument("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void write_spec(std::ostream& out, const nn::ModelSpec& spec) {
  put_u32(out, static_cast<std::uint32_t>(spec.kind));
  put_u32(out, static_cast<std::uint32_t>(spec.activation));
  put_u64(out, spec.input_dim);
  put_u64(out, spec.output_dim);
  put_u64(out, spec.hidden_dims.size());
  for (auto h : spec.hidden_dims) put_u64(out, h);
  put_u64(out, spec.probe_block.size());
  out.write(spec.probe_block.data(), static_cast<std::streamsize>(spec.probe_block.size()));
}

inline nn::ModelSpec read_spec(std::istream& in) {
  nn::ModelSpec spec;
  const std::uint32_t kind = get_u32(in);
  if (kind > 2) throw InvalidArgument("checkpoint: unknown model kind");
  spec.kind = static_cast<nn::ModelKind>(kind);
  const std::uint32_t act = get_u32(in);
  if (act > 1) throw InvalidArgument("checkpoint: unknown activation");
  spec.activation = static_cast<nn::Activation>(act);
  spec.input_dim = get_u64(in);
  spec.output_dim = get_u64(in);
  const std::uint64_t nh = get_u64(in);
  if (nh > 64) throw InvalidArgument("checkpoint: implausible hidden layer count");
  for (std::uint64_t i = 0; i < nh; ++i) spec.hidden_dims.push_back(get_u64(in));
  const std::uint64_t len = get_u64(in);
  if (len > 256) throw InvalidArgument("checkpoint: implausible probe name length");
  spec.probe_block.resize(len);
  in.read(spec.probe_block.data(), static_cast<std::streamsize>(len));
  if (!in) throw InvalidArgument("checkpoint: truncated file");
  spec.validate();
  return spec;
}

inline void write_params(std::ostream& out, const ParamVector& p) {
  put_u64(out, p.size());
  for (double v : p.values()) put_f64(out, v);
}

inline ParamVector read_params(std::istream& in, const nn::ModelSpec& spec) {
  const std::uint64_t n = get_u64(in);
  if (n != spec.param_count()) throw DimensionMismatch("checkpoint: parameter count mismatch");
  std::vector<double> v(n);
  for (auto& x : v) x = get_f64(in);
  return ParamVector(spec.shared_layout(), std::move(v));
}

inline void expect_magic(std::istream& in, const char* magic) {
  std::array<char, 8> m{};
  in.read(m.data(), 8);
  if (!in || std::memcmp(m.data(), magic, 8) != 0) throw InvalidArgument("checkpoint: bad magic");
}

}  // namespace detail

inline constexpr char kModelMagic[] = "BRCAMDL1";
inline constexpr char kDetectorMagic[] = "BRCADET1";

inline void save_model(const std::string& path, const nn::ModelSpec& spec, const ParamVector& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out.write(kModelMagic, 8);
  detail::write_spec(out, spec);
  detail::write_params(out, p);
}

struct ModelCheckpoint {
  nn::ModelSpec spec;
  ParamVector params;
};

inline ModelCheckpoint load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path);
  detail::expect_magic(in, kModelMagic);
  ModelCheckpoint c;
  c.spec = detail::read_spec(in);
  c.params = detail::read_params(in, c.spec);
  return c;
}

inline void save_detector(const std::string& path, const aadm::DetectorState& det) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out.write(kDetectorMagic, 8);
  detail::write_spec(out, det.spec);
  detail::put_u64(out, det.adapt_count);
  detail::put_f64(out, det.lr);
  detail::write_params(out, det.params);
}

inline aadm::DetectorState load_detector(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path);
  detail::expect_magic(in, kDetectorMagic);
  aadm::DetectorState det;
  det.spec = detail::read_spec(in);
  if (det.spec.kind != nn::ModelKind::kMlpAutoencoder)
    throw InvalidArgument("checkpoint: detector must be an autoencoder");
  det.adapt_count = detail::get_u64(in);
  det.lr = detail::get_f64(in);
  det.params = detail::read_params(in, det.spec);
  return det;
}

}  // namespace brca::checkpoint
