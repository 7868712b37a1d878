#pragma once

// Weight containers, manifests, synthetic test models, hardware cost tables.
//
// Container layout (bit-exact):
//   bytes 0..7   unsigned 64-bit little-endian header length N
//   bytes 8..8+N UTF-8 JSON mapping tensor name -> {dtype, shape, data_offsets}
//   rest         raw row-major little-endian tensor data
// Offsets are relative to the start of the data section. Supported dtypes:
// "F32" and "F64". Writes are deterministic: tensors laid out in sorted name
// order, header keys sorted, no insignificant whitespace.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "specprune/errors.hpp"
#include "specprune/rng.hpp"
#include "specprune/spectral.hpp"

namespace specprune {

enum class Dtype { f32, f64 };

inline std::size_t dtype_size(Dtype d) { return d == Dtype::f32 ? 4 : 8; }

inline std::string dtype_name(Dtype d) { return d == Dtype::f32 ? "F32" : "F64"; }

inline Dtype parse_dtype(const std::string& s) {
  if (s == "F32") return Dtype::f32;
  if (s == "F64") return Dtype::f64;
  throw UnsupportedDtypeError("unsupported dtype '" + s + "' (supported: F32, F64)");
}

struct Tensor {
  Dtype dtype = Dtype::f32;
  std::vector<std::int64_t> shape;
  std::vector<double> data;  // row-major; f32 values held exactly

  std::int64_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                           [](std::int64_t a, std::int64_t b) { return a * b; });
  }
};

// Sorted by name; iteration order is the on-disk layout order.
using TensorStore = std::map<std::string, Tensor>;

struct OperatorDescriptor {
  enum class Kind { conv2d, linear, attention_head };
  enum class Modality { vision, text, audio, none };
  enum class HwOp { conv, matmul, elementwise };

  std::string name;
  Kind kind = Kind::linear;
  std::string weight_key;
  std::optional<std::string> bias_key;
  Modality modality = Modality::none;
  HwOp hw_op = HwOp::matmul;
  ActivationSpec::Kind activation = ActivationSpec::Kind::relu;
  std::string stage;

  std::string kind_name() const {
    switch (kind) {
      case Kind::conv2d: return "conv2d";
      case Kind::linear: return "linear";
      case Kind::attention_head: return "attention_head";
    }
    return "?";
  }
  std::string modality_name() const {
    switch (modality) {
      case Modality::vision: return "vision";
      case Modality::text: return "text";
      case Modality::audio: return "audio";
      case Modality::none: return "none";
    }
    return "?";
  }
  std::string hw_op_name() const {
    switch (hw_op) {
      case HwOp::conv: return "conv";
      case HwOp::matmul: return "matmul";
      case HwOp::elementwise: return "elementwise";
    }
    return "?";
  }
};

struct Manifest {
  std::string model_name;
  std::vector<OperatorDescriptor> operators;

  const OperatorDescriptor& find(const std::string& name) const {
    for (const auto& op : operators)
      if (op.name == name) return op;
    std::string available;
    for (const auto& op : operators)
      available += (available.empty() ? "" : ", ") + op.name;
    throw LookupError("unknown operator '" + name + "' (available: " + available + ")");
  }
};

// ---------------------------------------------------------------------------
// Container I/O

namespace detail {

inline std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

inline TensorStore read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open container '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 8)
    throw IntegrityError("container '" + path + "': file too short for header length field");
  const std::uint64_t header_len =
      detail::read_u64_le(reinterpret_cast<const unsigned char*>(bytes.data()));
  if (header_len > bytes.size() - 8)
    throw IntegrityError("container '" + path + "': header length " +
                         std::to_string(header_len) + " exceeds file size " +
                         std::to_string(bytes.size()));

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("container '" + path + "': malformed header at byte offset " +
                     std::to_string(8 + e.byte) + ": " + e.what());
  }
  if (!header.is_object())
    throw ParseError("container '" + path + "': header is not a JSON object");

  const char* data = bytes.data() + 8 + header_len;
  const std::uint64_t data_len = bytes.size() - 8 - header_len;

  TensorStore store;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  for (const auto& [name, info] : header.items()) {
    if (name == "__metadata__") continue;
    if (!info.is_object() || !info.contains("dtype") || !info.contains("shape") ||
        !info.contains("data_offsets"))
      throw ParseError("container '" + path + "': tensor '" + name +
                       "' missing dtype/shape/data_offsets");
    Tensor t;
    t.dtype = parse_dtype(info["dtype"].get<std::string>());
    t.shape = info["shape"].get<std::vector<std::int64_t>>();
    for (auto d : t.shape)
      if (d < 0)
        throw ParseError("container '" + path + "': tensor '" + name +
                         "' has negative shape entry");
    const auto offsets = info["data_offsets"].get<std::vector<std::uint64_t>>();
    if (offsets.size() != 2 || offsets[1] < offsets[0])
      throw ParseError("container '" + path + "': tensor '" + name +
                       "' has malformed data_offsets");
    const std::uint64_t begin = offsets[0], end = offsets[1];
    if (end > data_len)
      throw IntegrityError("container '" + path + "': tensor '" + name +
                           "' range [" + std::to_string(begin) + ", " + std::to_string(end) +
                           ") exceeds data section of " + std::to_string(data_len) + " bytes");
    const std::uint64_t expect = static_cast<std::uint64_t>(t.numel()) * dtype_size(t.dtype);
    if (end - begin != expect)
      throw IntegrityError("container '" + path + "': tensor '" + name + "' declares " +
                           std::to_string(end - begin) + " bytes but shape needs " +
                           std::to_string(expect));
    ranges.emplace_back(begin, end);

    t.data.resize(static_cast<std::size_t>(t.numel()));
    if (t.dtype == Dtype::f32) {
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        float f;
        std::memcpy(&f, data + begin + 4 * i, 4);
        t.data[i] = static_cast<double>(f);
      }
    } else {
      std::memcpy(t.data.data(), data + begin, t.data.size() * 8);
    }
    store.emplace(name, std::move(t));
  }

  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i)
    if (ranges[i].first < ranges[i - 1].second)
      throw IntegrityError("container '" + path + "': overlapping tensor byte ranges");

  return store;
}

inline void write_container(const TensorStore& store, const std::string& path) {
  if (store.empty()) throw EmptyInputError("write_container: store is empty");

  nlohmann::json header = nlohmann::json::object();
  std::string data;
  std::uint64_t offset = 0;
  for (const auto& [name, t] : store) {  // std::map: sorted name order
    const std::uint64_t nbytes = static_cast<std::uint64_t>(t.numel()) * dtype_size(t.dtype);
    header[name] = {{"dtype", dtype_name(t.dtype)},
                    {"shape", t.shape},
                    {"data_offsets", {offset, offset + nbytes}}};
    if (t.dtype == Dtype::f32) {
      for (double v : t.data) {
        const float f = static_cast<float>(v);
        char buf[4];
        std::memcpy(buf, &f, 4);
        data.append(buf, 4);
      }
    } else {
      const char* p = reinterpret_cast<const char*>(t.data.data());
      data.append(p, t.data.size() * 8);
    }
    offset += nbytes;
  }

  const std::string header_str = header.dump();  // sorted keys, compact
  std::string out;
  detail::append_u64_le(out, header_str.size());
  out += header_str;
  out += data;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to '" + path + "'");
}

// ---------------------------------------------------------------------------
// Manifest I/O

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : m.operators) {
    nlohmann::json j = {{"name", op.name},
                        {"kind", op.kind_name()},
                        {"weight_key", op.weight_key},
                        {"modality", op.modality_name()},
                        {"hw_op", op.hw_op_name()},
                        {"activation", ActivationSpec::of(op.activation).name()},
                        {"stage", op.stage}};
    if (op.bias_key) j["bias_key"] = *op.bias_key;
    ops.push_back(std::move(j));
  }
  return {{"model_name", m.model_name}, {"operators", std::move(ops)}};
}

inline OperatorDescriptor operator_from_json(const nlohmann::json& j) {
  OperatorDescriptor op;
  op.name = j.at("name").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "conv2d")
    op.kind = OperatorDescriptor::Kind::conv2d;
  else if (kind == "linear")
    op.kind = OperatorDescriptor::Kind::linear;
  else if (kind == "attention_head")
    op.kind = OperatorDescriptor::Kind::attention_head;
  else
    throw ValidationError("operator '" + op.name + "': unknown kind '" + kind + "'");
  op.weight_key = j.at("weight_key").get<std::string>();
  if (j.contains("bias_key")) op.bias_key = j.at("bias_key").get<std::string>();
  const std::string modality = j.value("modality", "none");
  if (modality == "vision")
    op.modality = OperatorDescriptor::Modality::vision;
  else if (modality == "text")
    op.modality = OperatorDescriptor::Modality::text;
  else if (modality == "audio")
    op.modality = OperatorDescriptor::Modality::audio;
  else if (modality == "none")
    op.modality = OperatorDescriptor::Modality::none;
  else
    throw ValidationError("operator '" + op.name + "': unknown modality '" + modality + "'");
  const std::string hw = j.value("hw_op", "matmul");
  if (hw == "conv")
    op.hw_op = OperatorDescriptor::HwOp::conv;
  else if (hw == "matmul")
    op.hw_op = OperatorDescriptor::HwOp::matmul;
  else if (hw == "elementwise")
    op.hw_op = OperatorDescriptor::HwOp::elementwise;
  else
    throw ValidationError("operator '" + op.name + "': unknown hw_op '" + hw + "'");
  op.activation = ActivationSpec::parse(j.value("activation", "relu")).kind;
  op.stage = j.value("stage", "");
  return op;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  m.model_name = j.at("model_name").get<std::string>();
  for (const auto& jop : j.at("operators")) m.operators.push_back(operator_from_json(jop));
  return m;
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("manifest '" + path + "': " + e.what());
  }
  try {
    return manifest_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest '" + path + "': " + e.what());
  }
}

inline void write_manifest(const Manifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << manifest_to_json(m).dump(2) << "\n";
}

// Every manifest key must resolve; orphan tensors come back as warnings.
inline std::vector<std::string> check_manifest(const Manifest& m, const TensorStore& store) {
  std::map<std::string, bool> referenced;
  for (const auto& [name, t] : store) referenced[name] = false;
  for (const auto& op : m.operators) {
    auto it = referenced.find(op.weight_key);
    if (it == referenced.end())
      throw LookupError("operator '" + op.name + "': weight_key '" + op.weight_key +
                        "' not found in container");
    it->second = true;
    if (op.bias_key) {
      auto bt = referenced.find(*op.bias_key);
      if (bt == referenced.end())
        throw LookupError("operator '" + op.name + "': bias_key '" + *op.bias_key +
                          "' not found in container");
      bt->second = true;
    }
  }
  std::vector<std::string> warnings;
  for (const auto& [name, used] : referenced)
    if (!used) warnings.push_back("orphan tensor '" + name + "' not referenced by any operator");
  return warnings;
}

// ---------------------------------------------------------------------------
// Reshape conventions

// conv2d (C_out, C_in, kH, kW) -> C_out x (C_in*kH*kW) with row-major inner
// flattening; linear/attention_head pass through; absent bias -> zeros.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> reshape_for_augment(
    const OperatorDescriptor& op, const TensorStore& store) {
  auto wit = store.find(op.weight_key);
  if (wit == store.end())
    throw LookupError("operator '" + op.name + "': weight_key '" + op.weight_key +
                      "' not found in container");
  const Tensor& w = wit->second;

  Eigen::Index rows = 0, cols = 0;
  if (op.kind == OperatorDescriptor::Kind::conv2d) {
    if (w.shape.size() != 4)
      throw ShapeError("operator '" + op.name + "': conv2d weight must have 4 axes, got " +
                       std::to_string(w.shape.size()));
    rows = w.shape[0];
    cols = w.shape[1] * w.shape[2] * w.shape[3];
  } else {
    if (w.shape.size() != 2)
      throw ShapeError("operator '" + op.name + "': " + op.kind_name() +
                       " weight must have 2 axes, got " + std::to_string(w.shape.size()));
    rows = w.shape[0];
    cols = w.shape[1];
  }

  // Flat data is already row-major over (row, inner...) so a row-major map
  // gives the matrix directly.
  Eigen::MatrixXd weights =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data.data(), rows, cols);

  Eigen::VectorXd bias = Eigen::VectorXd::Zero(rows);
  if (op.bias_key) {
    auto bit = store.find(*op.bias_key);
    if (bit == store.end())
      throw LookupError("operator '" + op.name + "': bias_key '" + *op.bias_key +
                        "' not found in container");
    const Tensor& b = bit->second;
    if (b.shape.size() != 1 || b.shape[0] != rows)
      throw ShapeError("operator '" + op.name + "': bias shape incompatible with " +
                       std::to_string(rows) + " output channels");
    bias = Eigen::Map<const Eigen::VectorXd>(b.data.data(), rows);
  }
  return {std::move(weights), std::move(bias)};
}

// ---------------------------------------------------------------------------
// Synthetic models

enum class SyntheticProfile { resnet18_like, duplicate_probe };

struct SyntheticModel {
  TensorStore store;
  Manifest manifest;
};

namespace detail {

inline Tensor gaussian_tensor_f32(std::vector<std::int64_t> shape, double stddev, Rng& rng) {
  Tensor t;
  t.dtype = Dtype::f32;
  t.shape = std::move(shape);
  t.data.resize(static_cast<std::size_t>(t.numel()));
  for (auto& v : t.data) v = static_cast<double>(static_cast<float>(stddev * rng.gaussian()));
  return t;
}

inline Tensor zeros_tensor_f32(std::vector<std::int64_t> shape) {
  Tensor t;
  t.dtype = Dtype::f32;
  t.shape = std::move(shape);
  t.data.assign(static_cast<std::size_t>(t.numel()), 0.0);
  return t;
}

struct ConvSpec {
  std::string name;
  std::int64_t c_out, c_in, kh, kw;
  std::string stage;
};

}  // namespace detail

inline SyntheticModel generate_synthetic(SyntheticProfile profile, std::uint64_t seed) {
  SyntheticModel model;
  std::uint64_t stream = 0;

  auto add_op = [&](const std::string& name, OperatorDescriptor::Kind kind,
                    std::vector<std::int64_t> wshape, const std::string& stage,
                    OperatorDescriptor::HwOp hw, ActivationSpec::Kind act,
                    std::optional<Tensor> fixed_weight = std::nullopt) {
    OperatorDescriptor op;
    op.name = name;
    op.kind = kind;
    op.weight_key = name + ".weight";
    op.bias_key = name + ".bias";
    op.modality = profile == SyntheticProfile::resnet18_like
                      ? OperatorDescriptor::Modality::vision
                      : OperatorDescriptor::Modality::none;
    op.hw_op = hw;
    op.activation = act;
    op.stage = stage;

    const std::int64_t fan_out = wshape[0];
    std::int64_t fan_in = 1;
    for (std::size_t i = 1; i < wshape.size(); ++i) fan_in *= wshape[i];

    Rng wrng(mix_seed(seed, stream++));
    Rng brng(mix_seed(seed, stream++));
    Tensor w = fixed_weight
                   ? std::move(*fixed_weight)
                   : detail::gaussian_tensor_f32(wshape, std::sqrt(2.0 / double(fan_in)), wrng);
    Tensor b = profile == SyntheticProfile::duplicate_probe
                   ? detail::zeros_tensor_f32({fan_out})
                   : detail::gaussian_tensor_f32({fan_out}, 0.01, brng);
    model.store.emplace(*op.bias_key, std::move(b));
    model.store.emplace(op.weight_key, std::move(w));
    model.manifest.operators.push_back(std::move(op));
  };

  using K = OperatorDescriptor::Kind;
  using H = OperatorDescriptor::HwOp;
  using A = ActivationSpec::Kind;

  if (profile == SyntheticProfile::resnet18_like) {
    model.manifest.model_name = "resnet18_like";
    std::vector<detail::ConvSpec> convs = {
        {"conv1", 64, 3, 7, 7, "stem"},
        {"layer1.0.conv1", 64, 64, 3, 3, "layer1"},
        {"layer1.0.conv2", 64, 64, 3, 3, "layer1"},
        {"layer1.1.conv1", 64, 64, 3, 3, "layer1"},
        {"layer1.1.conv2", 64, 64, 3, 3, "layer1"},
        {"layer2.0.downsample", 128, 64, 1, 1, "layer2"},
        {"layer2.0.conv1", 128, 64, 3, 3, "layer2"},
        {"layer2.0.conv2", 128, 128, 3, 3, "layer2"},
        {"layer2.1.conv1", 128, 128, 3, 3, "layer2"},
        {"layer2.1.conv2", 128, 128, 3, 3, "layer2"},
        {"layer3.0.downsample", 256, 128, 1, 1, "layer3"},
        {"layer3.0.conv1", 256, 128, 3, 3, "layer3"},
        {"layer3.0.conv2", 256, 256, 3, 3, "layer3"},
        {"layer3.1.conv1", 256, 256, 3, 3, "layer3"},
        {"layer3.1.conv2", 256, 256, 3, 3, "layer3"},
        {"layer4.0.conv1", 512, 256, 3, 3, "layer4"},
        {"layer4.0.conv2", 512, 512, 3, 3, "layer4"},
        {"layer4.1.conv1", 512, 512, 3, 3, "layer4"},
        {"layer4.1.conv2", 512, 512, 3, 3, "layer4"},
    };
    for (const auto& c : convs)
      add_op(c.name, K::conv2d, {c.c_out, c.c_in, c.kh, c.kw}, c.stage, H::conv, A::relu);
    add_op("fc", K::linear, {1000, 512}, "head", H::matmul, A::identity);
    return model;
  }

  // duplicate_probe: one bit-exact duplicated pair plus deterministic layers
  // with well-separated spectra (diagonal step and geometric-decay profiles).
  model.manifest.model_name = "duplicate_probe";
  const std::int64_t d = 24;

  Rng dup_rng(mix_seed(seed, 1000));
  Tensor dup = detail::gaussian_tensor_f32({d, d}, std::sqrt(2.0 / double(d)), dup_rng);
  Tensor dup_copy = dup;
  add_op("block0.dup_a", K::linear, {d, d}, "block0", H::matmul, A::relu, std::move(dup));
  add_op("block0.dup_b", K::linear, {d, d}, "block0", H::matmul, A::relu, std::move(dup_copy));

  auto diag_tensor = [&](const std::vector<double>& diag) {
    Tensor t = detail::zeros_tensor_f32({d, d});
    for (std::int64_t i = 0; i < d && i < std::int64_t(diag.size()); ++i)
      t.data[static_cast<std::size_t>(i * d + i)] =
          static_cast<double>(static_cast<float>(diag[static_cast<std::size_t>(i)]));
    return t;
  };

  int sep = 0;
  for (int k : {1, 2, 3, 4, 6, 8, 12, 16}) {
    std::vector<double> diag(static_cast<std::size_t>(k), 8.0);
    char name[32];
    std::snprintf(name, sizeof(name), "sep.step%02d", k);
    add_op(name, K::linear, {d, d}, "sep" + std::to_string(sep++), H::matmul, A::relu,
           diag_tensor(diag));
  }
  for (double r : {0.15, 0.30, 0.45, 0.60, 0.75, 0.90}) {
    std::vector<double> diag(static_cast<std::size_t>(d));
    double v = 8.0;
    for (auto& x : diag) {
      x = v;
      v *= r;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "sep.geo%02d", int(r * 100));
    add_op(name, K::linear, {d, d}, "sep" + std::to_string(sep++), H::matmul, A::relu,
           diag_tensor(diag));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Hardware cost tables

struct CostTable {
  std::string target;
  CostMap costs;
};

inline CostTable cost_table_from_json(const nlohmann::json& j, const std::string& origin) {
  CostTable t;
  t.target = j.at("target").get<std::string>();
  for (const auto& [k, v] : j.at("costs").items()) {
    const double c = v.get<double>();
    if (!(c > 0.0))
      throw ValidationError("cost table '" + origin + "': cost for '" + k +
                            "' must be positive, got " + std::to_string(c));
    t.costs[k] = c;
  }
  return t;
}

// Tables bundled with the tool. conv reflects per-target convolution
// efficiency; matmul and elementwise default to 1.0.
inline CostTable builtin_cost_table(const std::string& target) {
  if (target == "ascend")
    return {"ascend", {{"conv", 1.2}, {"matmul", 1.0}, {"elementwise", 1.0}}};
  if (target == "mlu")
    return {"mlu", {{"conv", 1.5}, {"matmul", 1.0}, {"elementwise", 1.0}}};
  throw LookupError("no builtin cost table '" + target + "' (builtin: ascend, mlu)");
}

inline CostTable read_cost_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cost table '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("cost table '" + path + "': " + e.what());
  }
  try {
    return cost_table_from_json(j, path);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("cost table '" + path + "': " + e.what());
  }
}

inline void write_cost_table(const CostTable& t, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << nlohmann::json{{"target", t.target}, {"costs", t.costs}}.dump(2) << "\n";
}

}  // namespace specprune
