// Copyright 2026 The mgmd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint file layout (all integers little-endian):
//
//   "MGMDCKPT"                      8 bytes
//   format_version                  u32
//   header_length                   u64
//   header                          UTF-8 JSON: format_version, method, k,
//                                   objective, specs, config, partitions,
//                                   history shape, config echo
//   payload                         f64 arrays: every generator tensor, then
//                                   every discriminator tensor, then the
//                                   loss history (epoch-major)
//   digest                          SHA-256 of all preceding bytes

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include "mgmd/digest.hpp"
#include "mgmd/errors.hpp"
#include "mgmd/json_io.hpp"
#include "mgmd/training.hpp"

namespace mgmd {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'M', 'G', 'M', 'D', 'C', 'K', 'P', 'T'};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError("checkpoint truncated at byte offset " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline Json partitions_to_json(const PartitionSet& p) {
  return {{"k", p.k}, {"seed", p.seed}, {"stratified", p.stratified}, {"parts", p.parts}};
}

inline void read_params(ByteReader& in, const MlpSpec& spec, MlpParams& out) {
  out = zero_params(spec);
  for (Tensor& t : out.tensors) {
    for (double& v : t.data()) v = in.get<double>();
  }
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const TrainedModel& m) {
  const TrainConfig& c = m.config;
  Json header = {{"format_version", kCheckpointVersion},
                 {"method", to_string(m.method)},
                 {"k", c.k},
                 {"objective", to_json(c.objective)},
                 {"specs", {{"generator", to_json(c.generator)},
                            {"discriminator", to_json(c.discriminator)}}},
                 {"config", to_json(c)},
                 {"partitions", detail::partitions_to_json(m.partitions)},
                 {"n_generators", m.generators.size()},
                 {"n_discriminators", m.discriminators.size()},
                 {"history_epochs", m.history.size()},
                 {"config_echo", m.config_echo}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  auto put_params = [&](const std::vector<MlpParams>& nets, const MlpSpec& spec) {
    for (const MlpParams& p : nets) {
      check_params(spec, p);
      for (const Tensor& t : p.tensors) {
        for (double v : t.data()) detail::put_le<double>(out, v);
      }
    }
  };
  put_params(m.generators, c.generator);
  put_params(m.discriminators, c.discriminator);
  for (const EpochLosses& e : m.history) {
    if (e.d_loss.size() != m.discriminators.size() || e.g_loss.size() != m.generators.size() ||
        e.g_surrogate.size() != m.generators.size()) {
      throw CheckpointError("loss history does not match network counts");
    }
    for (double v : e.d_loss) detail::put_le<double>(out, v);
    for (double v : e.g_loss) detail::put_le<double>(out, v);
    for (double v : e.g_surrogate) detail::put_le<double>(out, v);
  }
  const Digest d = sha256(out);
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

inline TrainedModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kFixed = sizeof(kCheckpointMagic) + 4 + 8;
  if (bytes.size() < kFixed + 32) {
    throw CheckpointError("checkpoint digest error: file too short (" +
                          std::to_string(bytes.size()) + " bytes)");
  }
  const auto body = bytes.first(bytes.size() - 32);
  const Digest expect = sha256(body);
  if (!std::equal(expect.begin(), expect.end(), bytes.end() - 32)) {
    throw CheckpointError("checkpoint digest error: payload does not match stored SHA-256");
  }
  detail::ByteReader in(body);
  const auto magic = in.take(sizeof(kCheckpointMagic));
  if (!std::equal(magic.begin(), magic.end(), std::begin(kCheckpointMagic))) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version mismatch: file has " + std::to_string(version) +
                          ", reader supports " + std::to_string(kCheckpointVersion));
  }
  const auto header_len = in.get<std::uint64_t>();
  const auto header_bytes = in.take(header_len);
  TrainedModel m;
  std::size_t n_gen = 0, n_disc = 0, epochs = 0;
  try {
    const Json h = Json::parse(header_bytes.begin(), header_bytes.end());
    if (h.at("format_version").get<std::uint32_t>() != version) {
      throw CheckpointError("checkpoint header version disagrees with preamble");
    }
    m.config = train_config_from_json(h.at("config"));
    m.method = parse_method(h.at("method"));
    const Json& p = h.at("partitions");
    m.partitions.k = p.at("k").get<std::size_t>();
    m.partitions.seed = p.at("seed").get<std::uint64_t>();
    m.partitions.stratified = p.at("stratified").get<bool>();
    m.partitions.parts = p.at("parts").get<std::vector<std::vector<std::size_t>>>();
    n_gen = h.at("n_generators").get<std::size_t>();
    n_disc = h.at("n_discriminators").get<std::size_t>();
    epochs = h.at("history_epochs").get<std::size_t>();
    m.config_echo = h.at("config_echo").get<std::string>();
    m.config.generator.validate();
    m.config.discriminator.validate();
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  m.generators.resize(n_gen);
  m.discriminators.resize(n_disc);
  for (auto& g : m.generators) detail::read_params(in, m.config.generator, g);
  for (auto& d : m.discriminators) detail::read_params(in, m.config.discriminator, d);
  m.history.resize(epochs);
  for (EpochLosses& e : m.history) {
    e.d_loss.resize(n_disc);
    e.g_loss.resize(n_gen);
    e.g_surrogate.resize(n_gen);
    for (double& v : e.d_loss) v = in.get<double>();
    for (double& v : e.g_loss) v = in.get<double>();
    for (double& v : e.g_surrogate) v = in.get<double>();
  }
  if (in.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint payload");
  return m;
}

// Writes to a temporary sibling and renames, so readers never observe a
// partial file.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::filesystem::filesystem_error("cannot write", tmp,
                                              std::make_error_code(std::errc::io_error));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw std::filesystem::filesystem_error("short write", tmp,
                                              std::make_error_code(std::errc::io_error));
    }
  }
  std::filesystem::rename(tmp, path);
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

inline void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

inline TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes);
}

}  // namespace mgmd
