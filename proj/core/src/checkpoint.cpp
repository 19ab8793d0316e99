#include "panerf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "panerf/error.hpp"

namespace panerf {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what, pos_);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

void write_tensors(Writer& w, const FieldParams<float>& params) {
  w.u32(static_cast<std::uint32_t>(params.layers.size() * 2));
  for (const auto& layer : params.layers) {
    w.str(layer.name + ".weight");
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(layer.weight.rows()));
    w.u32(static_cast<std::uint32_t>(layer.weight.cols()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.f32(layer.weight(r, c));
    }
    w.str(layer.name + ".bias");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(layer.bias.size()));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) w.f32(layer.bias[i]);
  }
}

void read_tensors(Reader& r, FieldParams<float>& params) {
  const std::size_t start = r.offset();
  const std::uint32_t count = r.u32("tensor count");
  if (count != params.layers.size() * 2) {
    throw ParseError("checkpoint tensor count " + std::to_string(count) +
                         " does not match architecture (" +
                         std::to_string(params.layers.size() * 2) + ")",
                     start);
  }
  for (auto& layer : params.layers) {
    for (int part = 0; part < 2; ++part) {
      const std::size_t at = r.offset();
      const std::string expected = layer.name + (part == 0 ? ".weight" : ".bias");
      const std::string name = r.str("tensor name");
      if (name != expected) {
        throw ParseError("expected tensor '" + expected + "', found '" + name + "'", at);
      }
      const std::uint32_t rank = r.u32("tensor rank");
      const std::size_t dims_at = r.offset();
      if (rank != static_cast<std::uint32_t>(part == 0 ? 2 : 1)) {
        throw ParseError("tensor '" + name + "' has unexpected rank", dims_at);
      }
      if (part == 0) {
        const std::uint32_t rows = r.u32("tensor dims");
        const std::uint32_t cols = r.u32("tensor dims");
        if (rows != layer.weight.rows() || cols != layer.weight.cols()) {
          throw ParseError("tensor '" + name + "' has unexpected shape", dims_at);
        }
        for (std::uint32_t i = 0; i < rows; ++i) {
          for (std::uint32_t j = 0; j < cols; ++j) layer.weight(i, j) = r.f32("tensor data");
        }
      } else {
        const std::uint32_t n = r.u32("tensor dims");
        if (n != layer.bias.size()) {
          throw ParseError("tensor '" + name + "' has unexpected shape", dims_at);
        }
        for (std::uint32_t i = 0; i < n; ++i) layer.bias[i] = r.f32("tensor data");
      }
    }
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& cfg = ckpt.params.config;
  Writer w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cfg.encoding.position_frequencies));
  w.u32(static_cast<std::uint32_t>(cfg.encoding.direction_frequencies));
  w.u8(cfg.encoding.include_input ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(cfg.depth));
  w.u32(static_cast<std::uint32_t>(cfg.width));
  w.i32(cfg.skip_layer);
  write_tensors(w, ckpt.params);
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    w.u8(1);
    w.u32(o.stage);
    w.u64(o.iteration);
    w.u64(o.step);
    w.str(o.rng_state);
    write_tensors(w, o.first_moment);
    write_tensors(w, o.second_moment);
  } else {
    w.u8(0);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof(kCheckpointMagic); ++i) {
    if (r.u8("magic") != static_cast<std::uint8_t>(kCheckpointMagic[i])) {
      throw ParseError("not a panerf checkpoint (bad magic)", i);
    }
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint format version " + std::to_string(version) +
                    " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  FieldConfig cfg;
  const std::size_t cfg_at = r.offset();
  cfg.encoding.position_frequencies = static_cast<int>(r.u32("encoding"));
  cfg.encoding.direction_frequencies = static_cast<int>(r.u32("encoding"));
  cfg.encoding.include_input = r.u8("encoding") != 0;
  cfg.depth = static_cast<int>(r.u32("architecture"));
  cfg.width = static_cast<int>(r.u32("architecture"));
  cfg.skip_layer = r.i32("architecture");
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("invalid field configuration: ") + e.what(), cfg_at);
  }

  Checkpoint ckpt;
  ckpt.params = FieldParams<float>::zeros(cfg);
  read_tensors(r, ckpt.params);
  const std::size_t flag_at = r.offset();
  const std::uint8_t has_optimizer = r.u8("optimizer flag");
  if (has_optimizer > 1) throw ParseError("invalid optimizer flag", flag_at);
  if (has_optimizer == 1) {
    OptimizerSnapshot o;
    o.stage = r.u32("stage");
    o.iteration = r.u64("iteration");
    o.step = r.u64("optimizer step");
    o.rng_state = r.str("rng state");
    o.first_moment = FieldParams<float>::zeros(cfg);
    o.second_moment = FieldParams<float>::zeros(cfg);
    read_tensors(r, o.first_moment);
    read_tensors(r, o.second_moment);
    ckpt.optimizer = std::move(o);
  }
  if (!r.at_end()) throw ParseError("trailing bytes after checkpoint", r.offset());
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = serialize_checkpoint(checkpoint);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace panerf
