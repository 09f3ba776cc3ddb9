#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nomen/errors.hpp"
#include "nomen/model.hpp"

namespace nomen {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are not supported");

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

enum class TensorDtype { kF64, kF32 };

namespace detail {

inline constexpr char kModelMagic[8] = {'N', 'O', 'M', 'L', 'S', 'T', 'M', '1'};
inline constexpr int kFormatVersion = 1;

inline void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

inline void append_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

inline void append_tensor(std::string& out, const nn::Tensor& t,
                          TensorDtype dtype) {
  if (dtype == TensorDtype::kF64) {
    const auto* bytes = reinterpret_cast<const char*>(t.data.data());
    out.append(bytes, t.data.size() * sizeof(double));
  } else {
    for (const double v : t.data) {
      const auto f = static_cast<float>(v);
      char buf[4];
      std::memcpy(buf, &f, 4);
      out.append(buf, 4);
    }
  }
}

}  // namespace detail

/// Serialized frame: 8-byte magic "NOMLSTM1", little-endian u32 header
/// length, a UTF-8 JSON header (format version, config, taxonomy, provenance,
/// tensor manifest), raw little-endian tensor payloads in manifest order, and
/// a trailing little-endian 64-bit FNV-1a checksum over all preceding bytes.
/// Manifest offsets are relative to the start of the payload section.
inline void save_model(const LstmModel& model, const std::string& path,
                       TensorDtype dtype = TensorDtype::kF64) {
  const std::size_t scalar_size = dtype == TensorDtype::kF64 ? 8 : 4;

  nlohmann::json manifest = nlohmann::json::array();
  std::string payload;
  std::size_t offset = 0;
  for (const ConstParamRef& p : model.const_parameters()) {
    manifest.push_back({{"name", p.name},
                        {"shape", p.tensor->shape},
                        {"dtype", dtype == TensorDtype::kF64 ? "f64" : "f32"},
                        {"offset", offset}});
    detail::append_tensor(payload, *p.tensor, dtype);
    offset += p.tensor->numel() * scalar_size;
  }

  const nlohmann::json header = {
      {"format_version", detail::kFormatVersion},
      {"config",
       {{"lstm_sizes", model.config.lstm_sizes},
        {"dropout_rate", model.config.dropout_rate},
        {"num_classes", model.config.num_classes},
        {"input_channels", model.config.input_channels},
        {"max_seq_len", model.config.max_seq_len}}},
      {"taxonomy", model.class_names},
      {"provenance",
       {{"epochs_run", model.provenance.epochs_run},
        {"best_validation_accuracy",
         model.provenance.best_validation_accuracy},
        {"seed", model.provenance.seed}}},
      {"tensors", manifest}};
  const std::string header_text = header.dump();

  std::string frame;
  frame.reserve(12 + header_text.size() + payload.size() + 8);
  frame.append(detail::kModelMagic, 8);
  detail::append_u32(frame, static_cast<std::uint32_t>(header_text.size()));
  frame += header_text;
  frame += payload;
  detail::append_u64(frame, fnv1a64(frame));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(frame.data(), static_cast<std::streamsize>(frame.size()));
  if (!out) throw IoError("short write to " + path);
}

inline LstmModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string frame = buffer.str();

  if (frame.size() < 8 + 4 + 8) {
    throw ChecksumMismatch("file too short to be a model frame");
  }
  const std::string_view body(frame.data(), frame.size() - 8);
  std::uint64_t stored = 0;
  std::memcpy(&stored, frame.data() + frame.size() - 8, 8);
  if (fnv1a64(body) != stored) {
    throw ChecksumMismatch("checksum mismatch in " + path);
  }
  if (std::memcmp(frame.data(), detail::kModelMagic, 8) != 0) {
    throw IoError(path + " is not a model file");
  }
  std::uint32_t header_len = 0;
  std::memcpy(&header_len, frame.data() + 8, 4);
  if (12 + static_cast<std::size_t>(header_len) + 8 > frame.size()) {
    throw IoError("header length exceeds file size");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(frame.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad model header: ") + e.what());
  }
  try {
    if (header.at("format_version").get<int>() != detail::kFormatVersion) {
      throw FormatVersionMismatch(
          "unsupported format version " +
          header.at("format_version").dump());
    }
    ModelConfig config;
    const nlohmann::json& jc = header.at("config");
    config.lstm_sizes = jc.at("lstm_sizes").get<std::vector<std::size_t>>();
    config.dropout_rate = jc.at("dropout_rate").get<double>();
    config.num_classes = jc.at("num_classes").get<std::size_t>();
    config.input_channels = jc.at("input_channels").get<std::size_t>();
    config.max_seq_len = jc.at("max_seq_len").get<std::size_t>();

    LstmModel model = LstmModel::skeleton(
        config, header.at("taxonomy").get<std::vector<std::string>>());
    const nlohmann::json& jp = header.at("provenance");
    model.provenance.epochs_run = jp.at("epochs_run").get<std::size_t>();
    model.provenance.best_validation_accuracy =
        jp.at("best_validation_accuracy").get<double>();
    model.provenance.seed = jp.at("seed").get<std::uint64_t>();

    const std::size_t payload_base = 12 + header_len;
    const std::size_t payload_size = frame.size() - payload_base - 8;
    const nlohmann::json& manifest = header.at("tensors");
    std::vector<nn::ParamRef> params = model.parameters();
    if (manifest.size() != params.size()) {
      throw IoError("tensor manifest does not match the declared config");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const nlohmann::json& entry = manifest[i];
      if (entry.at("name").get<std::string>() != params[i].name ||
          entry.at("shape").get<std::vector<std::size_t>>() !=
              params[i].tensor->shape) {
        throw IoError("tensor manifest mismatch at " + params[i].name);
      }
      const std::string dtype = entry.at("dtype").get<std::string>();
      if (dtype != "f64" && dtype != "f32") {
        throw IoError("unknown dtype " + dtype);
      }
      const std::size_t scalar_size = dtype == "f64" ? 8 : 4;
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = params[i].tensor->numel();
      if (offset + count * scalar_size > payload_size) {
        throw IoError("tensor payload out of range at " + params[i].name);
      }
      const char* src = frame.data() + payload_base + offset;
      if (dtype == "f64") {
        std::memcpy(params[i].tensor->data.data(), src, count * 8);
      } else {
        for (std::size_t j = 0; j < count; ++j) {
          float f = 0.0f;
          std::memcpy(&f, src + j * 4, 4);
          params[i].tensor->data[j] = static_cast<double>(f);
        }
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad model header: ") + e.what());
  }
}

}  // namespace nomen
