#include "btc/io.hpp"

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace btc {

namespace {

// Explicit little-endian encoding keeps the binary formats host-independent.
void put_bytes(std::string& out, std::uint64_t value, int n) {
  for (int i = 0; i < n; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}
void put_u16(std::string& out, std::uint16_t v) { put_bytes(out, v, 2); }
void put_u32(std::string& out, std::uint32_t v) { put_bytes(out, v, 4); }
void put_f32(std::string& out, float v) { put_bytes(out, std::bit_cast<std::uint32_t>(v), 4); }
void put_f64(std::string& out, double v) { put_bytes(out, std::bit_cast<std::uint64_t>(v), 8); }

class Reader {
 public:
  Reader(std::string bytes, std::string what) : bytes_(std::move(bytes)), what_(std::move(what)) {}

  std::uint64_t take(int n) {
    if (pos_ + static_cast<std::size_t>(n) > bytes_.size())
      fail(ErrorCode::truncated_file, what_ + ": truncated at byte " + std::to_string(pos_));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(take(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(take(4))); }
  double f64() { return std::bit_cast<double>(take(8)); }

  std::string str(std::size_t n) {
    if (pos_ + n > bytes_.size())
      fail(ErrorCode::truncated_file, what_ + ": truncated at byte " + std::to_string(pos_));
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void expect_magic(const char* magic) {
    if (bytes_.size() < 4 || bytes_.compare(0, 4, magic) != 0)
      fail(ErrorCode::bad_magic, what_ + ": bad magic, expected \"" + magic + "\"");
    pos_ = 4;
  }

  void expect_done() {
    if (pos_ != bytes_.size())
      fail(ErrorCode::data_error, what_ + ": " + std::to_string(bytes_.size() - pos_) +
                                      " trailing bytes");
  }

 private:
  std::string bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(ErrorCode::io_error, "read failed on " + path);
  return std::move(buf).str();
}

// Temp-and-rename keeps readers from ever seeing a half-written file.
void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
  }
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_error, "cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::io_error, "write failed on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) fail(ErrorCode::io_error, "rename to " + path + " failed: " + ec.message());
}

}  // namespace

AnnotationTrack parse_lab(const std::string& path) {
  std::istringstream in(read_file(path));
  AnnotationTrack track;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    double start = 0.0, end = 0.0;
    std::string chord, extra;
    if (!(ls >> start >> end >> chord) || (ls >> extra))
      fail(ErrorCode::parse_error, path + ":" + std::to_string(line_no) + ": malformed line \"" +
                                       line + "\"");
    if (!(start < end))
      fail(ErrorCode::parse_error, path + ":" + std::to_string(line_no) +
                                       ": start >= end (" + std::to_string(start) + " >= " +
                                       std::to_string(end) + ")");
    track.push_back({start, end, parse_chord(chord)});
  }
  return track;
}

void write_lab(const AnnotationTrack& track, const std::string& path) {
  validate_track(track);
  std::string out;
  char buf[96];
  for (const auto& iv : track) {
    std::snprintf(buf, sizeof buf, "%.6f %.6f %s\n", iv.start, iv.end,
                  format_chord(iv.label).c_str());
    out += buf;
  }
  write_file_atomic(path, out);
}

FeatureMatrix read_btcf(const std::string& path) {
  Reader r(read_file(path), path);
  r.expect_magic("BTCF");
  const std::uint32_t version = r.u32();
  if (version != 1)
    fail(ErrorCode::unknown_version, path + ": unsupported BTCF version " +
                                         std::to_string(version));
  FeatureMatrix S;
  S.n_frames = static_cast<int>(r.u32());
  const std::uint32_t n_bins = r.u32();
  if (n_bins != kNumBins)
    fail(ErrorCode::data_error, path + ": expected " + std::to_string(kNumBins) + " bins, got " +
                                    std::to_string(n_bins));
  S.sample_rate = r.f64();
  S.hop = static_cast<int>(r.u32());
  S.data.resize(static_cast<std::size_t>(S.n_frames) * kNumBins);
  for (auto& v : S.data) v = r.f32();
  r.expect_done();
  return S;
}

void write_btcf(const FeatureMatrix& S, const std::string& path) {
  validate_features(S);
  std::string out = "BTCF";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(S.n_frames));
  put_u32(out, kNumBins);
  put_f64(out, S.sample_rate);
  put_u32(out, static_cast<std::uint32_t>(S.hop));
  for (float v : S.data) put_f32(out, v);
  write_file_atomic(path, out);
}

NormStats read_stats(const std::string& path) {
  std::istringstream in(read_file(path));
  NormStats stats;
  bool have_mean = false, have_var = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::parse_error, path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "mean") {
        stats.mean = std::stod(value);
        have_mean = true;
      } else if (key == "variance") {
        stats.variance = std::stod(value);
        have_var = true;
      } else {
        fail(ErrorCode::parse_error, path + ": unknown stats key \"" + key + "\"");
      }
    } catch (const std::invalid_argument&) {
      fail(ErrorCode::parse_error, path + ":" + std::to_string(line_no) + ": bad number \"" +
                                       value + "\"");
    }
  }
  if (!have_mean || !have_var)
    fail(ErrorCode::parse_error, path + ": stats file must define mean and variance");
  if (!(stats.variance > 0.0))
    fail(ErrorCode::data_error, path + ": variance must be positive");
  return stats;
}

void write_stats(const NormStats& stats, const std::string& path) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "mean=%.17g\nvariance=%.17g\n", stats.mean, stats.variance);
  write_file_atomic(path, buf);
}

Checkpoint read_checkpoint(const std::string& path) {
  Reader r(read_file(path), path);
  r.expect_magic("BTCW");
  const std::uint32_t version = r.u32();
  if (version != 1)
    fail(ErrorCode::unknown_version, path + ": unsupported BTCW version " +
                                         std::to_string(version));
  Checkpoint ckpt;
  const std::uint32_t config_len = r.u32();
  std::istringstream cfg(r.str(config_len));
  std::string line;
  while (std::getline(cfg, line)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::data_error, path + ": config line without '=': \"" + line + "\"");
    ckpt.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = r.str(r.u16());
    for (const auto& prev : ckpt.tensors)
      if (prev.name == t.name)
        fail(ErrorCode::duplicate_tensor, path + ": duplicate tensor \"" + t.name + "\"");
    const int ndim = static_cast<int>(r.take(1));
    std::int64_t n = 1;
    for (int d = 0; d < ndim; ++d) {
      t.shape.push_back(static_cast<int>(r.u32()));
      n *= t.shape.back();
    }
    t.data.resize(static_cast<std::size_t>(n));
    for (auto& v : t.data) v = r.f32();
    ckpt.tensors.push_back(std::move(t));
  }
  r.expect_done();
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string config_blob;
  for (const auto& [key, value] : ckpt.config) config_blob += key + "=" + value + "\n";

  std::string out = "BTCW";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(config_blob.size()));
  out += config_blob;
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    for (const auto& other : ckpt.tensors)
      if (&other != &t && other.name == t.name)
        fail(ErrorCode::duplicate_tensor, "duplicate tensor \"" + t.name + "\"");
    if (t.name.size() > 0xffff) fail(ErrorCode::data_error, "tensor name too long");
    put_u16(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    if (t.shape.size() > 0xff) fail(ErrorCode::data_error, "tensor rank too large");
    out.push_back(static_cast<char>(t.shape.size()));
    std::int64_t n = 1;
    for (int d : t.shape) {
      put_u32(out, static_cast<std::uint32_t>(d));
      n *= d;
    }
    if (static_cast<std::int64_t>(t.data.size()) != n)
      fail(ErrorCode::shape_mismatch, "tensor \"" + t.name + "\" payload does not match shape");
    for (float v : t.data) put_f32(out, v);
  }
  write_file_atomic(path, out);
}

namespace {

std::string config_value(const Checkpoint& ckpt, const std::string& key, const std::string& path) {
  for (const auto& [k, v] : ckpt.config)
    if (k == key) return v;
  fail(ErrorCode::data_error, path + ": checkpoint config missing \"" + key + "\"");
}

}  // namespace

void save_model(const BtcModel<float>& model, VocabKind vocab, const NormStats& stats,
                std::uint64_t seed, const std::string& path) {
  const BtcConfig& cfg = model.config();
  Checkpoint ckpt;
  char buf[64];
  auto put = [&](const std::string& key, const std::string& value) {
    ckpt.config.emplace_back(key, value);
  };
  put("n_layers", std::to_string(cfg.n_layers));
  put("n_heads", std::to_string(cfg.n_heads));
  put("model_dim", std::to_string(cfg.model_dim));
  put("conv_repeats", std::to_string(cfg.conv_repeats));
  put("kernel", std::to_string(cfg.kernel));
  std::snprintf(buf, sizeof buf, "%.17g", cfg.dropout);
  put("dropout", buf);
  put("input_bins", std::to_string(cfg.input_bins));
  put("vocab_size", std::to_string(cfg.vocab_size));
  put("seq_len", std::to_string(cfg.seq_len));
  put("vocab", vocab_kind_name(vocab));
  std::snprintf(buf, sizeof buf, "%.17g", stats.mean);
  put("norm_mean", buf);
  std::snprintf(buf, sizeof buf, "%.17g", stats.variance);
  put("norm_variance", buf);
  put("seed", std::to_string(seed));

  for (const auto& [name, tensor] : model.named_params()) {
    NamedTensor t;
    t.name = name;
    t.shape = tensor.shape();
    t.data.assign(tensor.data().begin(), tensor.data().end());
    ckpt.tensors.push_back(std::move(t));
  }
  write_checkpoint(ckpt, path);
}

LoadedModel load_model(const std::string& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  auto get = [&](const std::string& key) { return config_value(ckpt, key, path); };
  BtcConfig cfg;
  try {
    cfg.n_layers = std::stoi(get("n_layers"));
    cfg.n_heads = std::stoi(get("n_heads"));
    cfg.model_dim = std::stoi(get("model_dim"));
    cfg.conv_repeats = std::stoi(get("conv_repeats"));
    cfg.kernel = std::stoi(get("kernel"));
    cfg.dropout = std::stod(get("dropout"));
    cfg.input_bins = std::stoi(get("input_bins"));
    cfg.vocab_size = std::stoi(get("vocab_size"));
    cfg.seq_len = std::stoi(get("seq_len"));
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::data_error, path + ": malformed numeric config value");
  }
  cfg.validate();
  const VocabKind vocab = vocab_kind_from_name(get("vocab"));
  NormStats stats;
  stats.mean = std::stod(get("norm_mean"));
  stats.variance = std::stod(get("norm_variance"));
  const std::uint64_t seed = std::stoull(get("seed"));

  Rng init_rng(0);
  LoadedModel out{vocab, stats, seed, BtcModel<float>(cfg, init_rng)};
  const auto& params = out.model.named_params();
  if (params.size() != ckpt.tensors.size())
    fail(ErrorCode::data_error, path + ": checkpoint has " + std::to_string(ckpt.tensors.size()) +
                                    " tensors, model needs " + std::to_string(params.size()));
  for (const auto& [name, tensor] : params) {
    const NamedTensor* found = nullptr;
    for (const auto& t : ckpt.tensors)
      if (t.name == name) {
        found = &t;
        break;
      }
    if (!found) fail(ErrorCode::data_error, path + ": checkpoint missing tensor \"" + name + "\"");
    if (found->shape != tensor.shape())
      fail(ErrorCode::shape_mismatch, path + ": tensor \"" + name + "\" has shape " +
                                          shape_str(found->shape) + ", expected " +
                                          shape_str(tensor.shape()));
    Tensor<float> dst = tensor;
    std::copy(found->data.begin(), found->data.end(), dst.mutable_data().begin());
  }
  return out;
}

std::vector<std::string> write_attention(const AttentionMapSet& maps, const std::string& dir,
                                         const std::vector<int>& layers, bool pgm) {
  std::filesystem::path base(dir);
  std::error_code ec;
  std::filesystem::create_directories(base, ec);
  if (ec) fail(ErrorCode::io_error, "cannot create directory " + dir + ": " + ec.message());

  std::vector<std::string> written;
  const int T = maps.seq_len;
  for (int layer = 0; layer < maps.n_layers; ++layer) {
    if (!layers.empty() &&
        std::find(layers.begin(), layers.end(), layer + 1) == layers.end())
      continue;
    for (Direction d : {Direction::forward, Direction::backward}) {
      const char dc = d == Direction::forward ? 'f' : 'b';
      for (int head = 0; head < maps.n_heads; ++head) {
        const std::vector<float>& probs = maps.at(layer, d, head);
        char name[64];
        std::snprintf(name, sizeof name, "layer%d_%c_head%d", layer + 1, dc, head + 1);

        std::string text = "# layer=" + std::to_string(layer + 1) + " dir=" + dc +
                           " head=" + std::to_string(head + 1) + " T=" + std::to_string(T) + "\n";
        char num[32];
        for (int i = 0; i < T; ++i) {
          for (int j = 0; j < T; ++j) {
            std::snprintf(num, sizeof num, "%.8g", probs[static_cast<std::size_t>(i) * T + j]);
            if (j) text += ' ';
            text += num;
          }
          text += '\n';
        }
        const std::string txt_path = (base / (std::string(name) + ".txt")).string();
        write_file_atomic(txt_path, text);
        written.push_back(txt_path);

        if (pgm) {
          std::string gray = "P5\n" + std::to_string(T) + " " + std::to_string(T) + "\n255\n";
          for (std::size_t i = 0; i < probs.size(); ++i)
            gray.push_back(static_cast<char>(
                static_cast<int>(std::lround(255.0 * static_cast<double>(probs[i])))));
          const std::string pgm_path = (base / (std::string(name) + ".pgm")).string();
          write_file_atomic(pgm_path, gray);
          written.push_back(pgm_path);
        }
      }
    }
  }
  return written;
}

ParsedAttention parse_attention(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string header;
  if (!std::getline(in, header)) fail(ErrorCode::parse_error, path + ": empty attention dump");
  ParsedAttention out;
  char dc = 0;
  if (std::sscanf(header.c_str(), "# layer=%d dir=%c head=%d T=%d", &out.layer, &dc, &out.head,
                  &out.seq_len) != 4 ||
      (dc != 'f' && dc != 'b') || out.seq_len < 1)
    fail(ErrorCode::parse_error, path + ": bad attention header \"" + header + "\"");
  out.dir = dc == 'f' ? Direction::forward : Direction::backward;
  const int T = out.seq_len;
  out.probs.resize(static_cast<std::size_t>(T) * T);
  for (int i = 0; i < T; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < T; ++j) {
      double v = 0.0;
      if (!(in >> v))
        fail(ErrorCode::parse_error, path + ": dump ends inside row " + std::to_string(i));
      out.probs[static_cast<std::size_t>(i) * T + j] = static_cast<float>(v);
      row_sum += v;
    }
    if (std::abs(row_sum - 1.0) > 1e-4)
      fail(ErrorCode::data_error, path + ": row " + std::to_string(i) + " sums to " +
                                      std::to_string(row_sum));
  }
  return out;
}

}  // namespace btc
