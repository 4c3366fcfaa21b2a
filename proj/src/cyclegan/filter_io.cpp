#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "sanitone/cyclegan.hpp"
#include "sanitone/detail/crc32.hpp"
#include "sanitone/errors.hpp"

namespace sanitone {

namespace {

constexpr char kFilterMagic[4] = {'E', 'F', 'L', 'T'};
constexpr char kCheckpointMagic[4] = {'E', 'F', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw CorruptFile("bad numeric field: " + s);
  }
}

long parse_long(const std::string& s) {
  try {
    return std::stol(s);
  } catch (const std::exception&) {
    throw CorruptFile("bad integer field: " + s);
  }
}

std::string join_numbers(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(',');
    out += format_double(values[i]);
  }
  return out;
}

std::string join_ints(std::span<const int> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::string& b, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  return v;
}

// key = value lines; fixed emission order keeps serialization deterministic
class Header {
 public:
  void put(const std::string& key, const std::string& value) {
    text_ += key;
    text_ += '=';
    text_ += value;
    text_ += '\n';
  }
  void put(const std::string& key, double v) { put(key, format_double(v)); }
  void put(const std::string& key, long v) { put(key, std::to_string(v)); }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

std::map<std::string, std::string> parse_header(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CorruptFile("malformed header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv,
                        const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw CorruptFile("missing header key: " + key);
  return it->second;
}

void emit_arch(Header& h, const ArchDescriptor& a) {
  h.put("arch.feature_dim", static_cast<long>(a.feature_dim));
  h.put("arch.gen_widths", join_ints(a.gen_widths));
  h.put("arch.gen_kernel", static_cast<long>(a.gen_kernel));
  h.put("arch.res_kernel", static_cast<long>(a.res_kernel));
  h.put("arch.residual_blocks", static_cast<long>(a.residual_blocks));
  h.put("arch.disc_widths", join_ints(a.disc_widths));
  h.put("arch.disc_kernel", static_cast<long>(a.disc_kernel));
}

ArchDescriptor parse_arch(const std::map<std::string, std::string>& kv) {
  ArchDescriptor a;
  a.feature_dim = static_cast<int>(parse_long(need(kv, "arch.feature_dim")));
  a.gen_widths.clear();
  for (const auto& s : split(need(kv, "arch.gen_widths"), ','))
    a.gen_widths.push_back(static_cast<int>(parse_long(s)));
  a.gen_kernel = static_cast<int>(parse_long(need(kv, "arch.gen_kernel")));
  a.res_kernel = static_cast<int>(parse_long(need(kv, "arch.res_kernel")));
  a.residual_blocks =
      static_cast<int>(parse_long(need(kv, "arch.residual_blocks")));
  a.disc_widths.clear();
  for (const auto& s : split(need(kv, "arch.disc_widths"), ','))
    a.disc_widths.push_back(static_cast<int>(parse_long(s)));
  a.disc_kernel = static_cast<int>(parse_long(need(kv, "arch.disc_kernel")));
  return a;
}

void emit_stats(Header& h, const FrozenFilter& f) {
  h.put("f0_src.mean_log", f.f0_src.mean_log_f0);
  h.put("f0_src.std_log", f.f0_src.std_log_f0);
  h.put("f0_src.count", static_cast<long>(f.f0_src.voiced_frame_count));
  h.put("f0_tgt.mean_log", f.f0_tgt.mean_log_f0);
  h.put("f0_tgt.std_log", f.f0_tgt.std_log_f0);
  h.put("f0_tgt.count", static_cast<long>(f.f0_tgt.voiced_frame_count));
  h.put("feat.mean", join_numbers(f.feature_stats.mean));
  h.put("feat.std", join_numbers(f.feature_stats.stddev));
  h.put("vocoder.frame_period_ms", f.vocoder.frame_period_ms);
  h.put("vocoder.fft_size", static_cast<long>(f.vocoder.fft_size));
  h.put("vocoder.f0_floor_hz", f.vocoder.f0_floor_hz);
  h.put("vocoder.f0_ceil_hz", f.vocoder.f0_ceil_hz);
  h.put("features.order", static_cast<long>(f.features.order));
  h.put("features.alpha", f.features.alpha);
  h.put("features.energy_passthrough",
        static_cast<long>(f.features.energy_passthrough ? 1 : 0));
}

void parse_stats(const std::map<std::string, std::string>& kv, FrozenFilter& f) {
  f.f0_src.mean_log_f0 = parse_double(need(kv, "f0_src.mean_log"));
  f.f0_src.std_log_f0 = parse_double(need(kv, "f0_src.std_log"));
  f.f0_src.voiced_frame_count =
      static_cast<std::size_t>(parse_long(need(kv, "f0_src.count")));
  f.f0_tgt.mean_log_f0 = parse_double(need(kv, "f0_tgt.mean_log"));
  f.f0_tgt.std_log_f0 = parse_double(need(kv, "f0_tgt.std_log"));
  f.f0_tgt.voiced_frame_count =
      static_cast<std::size_t>(parse_long(need(kv, "f0_tgt.count")));
  f.feature_stats.mean.clear();
  for (const auto& s : split(need(kv, "feat.mean"), ','))
    f.feature_stats.mean.push_back(parse_double(s));
  f.feature_stats.stddev.clear();
  for (const auto& s : split(need(kv, "feat.std"), ','))
    f.feature_stats.stddev.push_back(parse_double(s));
  f.vocoder.frame_period_ms = parse_double(need(kv, "vocoder.frame_period_ms"));
  f.vocoder.fft_size = static_cast<int>(parse_long(need(kv, "vocoder.fft_size")));
  f.vocoder.f0_floor_hz = parse_double(need(kv, "vocoder.f0_floor_hz"));
  f.vocoder.f0_ceil_hz = parse_double(need(kv, "vocoder.f0_ceil_hz"));
  f.features.order = static_cast<int>(parse_long(need(kv, "features.order")));
  f.features.alpha = parse_double(need(kv, "features.alpha"));
  f.features.energy_passthrough =
      parse_long(need(kv, "features.energy_passthrough")) != 0;
}

std::string shape_string(const nn::Tensor& t) {
  std::string out;
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(t.shape[i]);
  }
  return out;
}

std::vector<std::size_t> parse_shape(const std::string& s) {
  std::vector<std::size_t> shape;
  for (const auto& part : split(s, ','))
    shape.push_back(static_cast<std::size_t>(parse_long(part)));
  return shape;
}

void emit_network(Header& h, const std::string& prefix, const nn::ModelParams& p) {
  h.put(prefix + ".layers", static_cast<long>(p.layers.size()));
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const nn::Layer& l = p.layers[i];
    std::string line = l.name;
    line += '|';
    line += nn::layer_kind_name(l.kind);
    line += '|';
    line += std::to_string(l.stride);
    line += '|';
    line += std::to_string(l.upsample);
    line += '|';
    line += std::to_string(l.skip_add_from);
    line += '|';
    line += shape_string(l.weight);
    line += '|';
    line += shape_string(l.bias);
    h.put(prefix + ".layer." + std::to_string(i), line);
  }
}

nn::ModelParams parse_network(const std::map<std::string, std::string>& kv,
                              const std::string& prefix) {
  nn::ModelParams p;
  const long count = parse_long(need(kv, prefix + ".layers"));
  for (long i = 0; i < count; ++i) {
    const auto parts =
        split(need(kv, prefix + ".layer." + std::to_string(i)), '|');
    if (parts.size() != 7) throw CorruptFile("malformed layer entry");
    nn::Layer l;
    l.name = parts[0];
    l.kind = nn::layer_kind_from_name(parts[1]);
    l.stride = static_cast<int>(parse_long(parts[2]));
    l.upsample = static_cast<int>(parse_long(parts[3]));
    l.skip_add_from = static_cast<int>(parse_long(parts[4]));
    l.weight = nn::Tensor(parse_shape(parts[5]));
    l.bias = nn::Tensor(parse_shape(parts[6]));
    p.layers.push_back(std::move(l));
  }
  return p;
}

void append_blob(std::string& out, const nn::Tensor& t, bool single_precision) {
  if (single_precision) {
    for (double v : t.data) {
      const float f = static_cast<float>(v);
      char buf[4];
      std::memcpy(buf, &f, 4);
      out.append(buf, 4);
    }
  } else {
    const char* raw = reinterpret_cast<const char*>(t.data.data());
    out.append(raw, t.data.size() * sizeof(double));
  }
}

void read_blob(const std::string& in, std::size_t& off, nn::Tensor& t,
               bool single_precision) {
  const std::size_t bytes = t.data.size() * (single_precision ? 4 : 8);
  if (off + bytes > in.size()) throw CorruptFile("truncated weight blob");
  if (single_precision) {
    for (double& v : t.data) {
      float f;
      std::memcpy(&f, in.data() + off, 4);
      v = static_cast<double>(f);
      off += 4;
    }
  } else {
    std::memcpy(t.data.data(), in.data() + off, bytes);
    off += bytes;
  }
}

void append_network_blobs(std::string& out, const nn::ModelParams& p,
                          bool single_precision) {
  for (const auto& l : p.layers) {
    append_blob(out, l.weight, single_precision);
    append_blob(out, l.bias, single_precision);
  }
}

void read_network_blobs(const std::string& in, std::size_t& off,
                        nn::ModelParams& p, bool single_precision) {
  for (auto& l : p.layers) {
    read_blob(in, off, l.weight, single_precision);
    read_blob(in, off, l.bias, single_precision);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("short write to " + path.string());
}

// container layout shared by filter and checkpoint files:
//   magic | u32 version | u64 header length | header text | blobs | crc32
std::string assemble(const char magic[4], const std::string& header,
                     const std::string& blobs) {
  std::string out;
  out.append(magic, 4);
  put_u32(out, kFormatVersion);
  put_u64(out, static_cast<std::uint64_t>(header.size()));
  out += header;
  out += blobs;
  const std::uint32_t crc = detail::crc32(out.data(), out.size());
  put_u32(out, crc);
  return out;
}

struct Container {
  std::map<std::string, std::string> header;
  std::string bytes;
  std::size_t blob_offset = 0;
};

Container open_container(const std::filesystem::path& path, const char magic[4]) {
  Container c;
  c.bytes = read_file(path);
  if (c.bytes.size() < 20 || std::memcmp(c.bytes.data(), magic, 4) != 0)
    throw CorruptFile(path.string() + ": bad magic");
  const std::uint32_t version = get_u32(c.bytes, 4);
  if (version != kFormatVersion)
    throw VersionMismatch(path.string() + ": unknown format version " +
                          std::to_string(version));
  const std::uint64_t header_len = get_u64(c.bytes, 8);
  if (16 + header_len + 4 > c.bytes.size())
    throw CorruptFile(path.string() + ": truncated header");
  const std::uint32_t stored = get_u32(c.bytes, c.bytes.size() - 4);
  const std::uint32_t actual =
      detail::crc32(c.bytes.data(), c.bytes.size() - 4);
  if (stored != actual) throw CorruptFile(path.string() + ": checksum mismatch");
  c.header = parse_header(c.bytes.substr(16, header_len));
  c.blob_offset = 16 + static_cast<std::size_t>(header_len);
  return c;
}

}  // namespace

void save_filter(const std::filesystem::path& path, const FrozenFilter& f) {
  Header h;
  h.put("precision", f.single_precision ? "f32" : "f64");
  emit_arch(h, f.arch);
  emit_stats(h, f);
  emit_network(h, "generator", f.generator);

  std::string blobs;
  append_network_blobs(blobs, f.generator, f.single_precision);
  write_file(path, assemble(kFilterMagic, h.text(), blobs));
}

FrozenFilter load_filter(const std::filesystem::path& path) {
  Container c = open_container(path, kFilterMagic);
  FrozenFilter f;
  f.format_version = kFormatVersion;
  f.single_precision = need(c.header, "precision") == "f32";
  f.arch = parse_arch(c.header);
  parse_stats(c.header, f);
  f.generator = parse_network(c.header, "generator");
  std::size_t off = c.blob_offset;
  read_network_blobs(c.bytes, off, f.generator, f.single_precision);
  if (off + 4 != c.bytes.size())
    throw CorruptFile(path.string() + ": trailing bytes after weights");
  return f;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  FrozenFilter view;  // reuse the stats emitter
  view.f0_src = c.f0_src;
  view.f0_tgt = c.f0_tgt;
  view.feature_stats = c.feature_stats;
  view.vocoder = c.vocoder;
  view.features = c.features;

  Header h;
  h.put("precision", "f64");
  emit_arch(h, c.model.arch);
  emit_stats(h, view);
  emit_network(h, "gen_xy", c.model.gen_xy);
  emit_network(h, "gen_yx", c.model.gen_yx);
  emit_network(h, "disc_x", c.model.disc_x);
  emit_network(h, "disc_y", c.model.disc_y);

  std::string blobs;
  append_network_blobs(blobs, c.model.gen_xy, false);
  append_network_blobs(blobs, c.model.gen_yx, false);
  append_network_blobs(blobs, c.model.disc_x, false);
  append_network_blobs(blobs, c.model.disc_y, false);
  write_file(path, assemble(kCheckpointMagic, h.text(), blobs));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Container c = open_container(path, kCheckpointMagic);
  Checkpoint out;
  out.model.arch = parse_arch(c.header);

  FrozenFilter view;
  parse_stats(c.header, view);
  out.f0_src = view.f0_src;
  out.f0_tgt = view.f0_tgt;
  out.feature_stats = view.feature_stats;
  out.vocoder = view.vocoder;
  out.features = view.features;

  out.model.gen_xy = parse_network(c.header, "gen_xy");
  out.model.gen_yx = parse_network(c.header, "gen_yx");
  out.model.disc_x = parse_network(c.header, "disc_x");
  out.model.disc_y = parse_network(c.header, "disc_y");
  std::size_t off = c.blob_offset;
  read_network_blobs(c.bytes, off, out.model.gen_xy, false);
  read_network_blobs(c.bytes, off, out.model.gen_yx, false);
  read_network_blobs(c.bytes, off, out.model.disc_x, false);
  read_network_blobs(c.bytes, off, out.model.disc_y, false);
  if (off + 4 != c.bytes.size())
    throw CorruptFile(path.string() + ": trailing bytes after weights");
  return out;
}

FrozenFilter freeze(const CycleGanModel& m, const F0Stats& f0_src,
                    const F0Stats& f0_tgt, const FeatureStats& stats,
                    const VocoderConfig& vocoder_cfg,
                    const FeatureConfig& feature_cfg) {
  FrozenFilter f;
  f.arch = m.arch;
  f.generator = m.gen_xy;
  f.f0_src = f0_src;
  f.f0_tgt = f0_tgt;
  f.feature_stats = stats;
  f.vocoder = vocoder_cfg;
  f.features = feature_cfg;
  return f;
}

FrozenFilter to_single_precision(const FrozenFilter& f) {
  FrozenFilter out = f;
  out.single_precision = true;
  for (auto& l : out.generator.layers) {
    for (double& v : l.weight.data) v = static_cast<double>(static_cast<float>(v));
    for (double& v : l.bias.data) v = static_cast<double>(static_cast<float>(v));
  }
  return out;
}

nn::Tensor FrozenFilter::run_generator(const nn::Tensor& t) const {
  return nn::forward(generator, t);
}

McepSequence FrozenFilter::convert(const McepSequence& m) const {
  if (m.width() != feature_stats.dims())
    throw ShapeMismatch("feature width does not match the filter's stats");

  const McepSequence z = normalize(m, feature_stats);
  const std::size_t frames = z.frames();
  const std::size_t divisor = static_cast<std::size_t>(arch.time_divisor());
  const std::size_t padded = (frames + divisor - 1) / divisor * divisor;

  nn::Tensor t({z.width(), padded});
  for (std::size_t f = 0; f < padded; ++f) {
    const auto row = z.coeffs.row(std::min(f, frames - 1));  // edge replicate
    for (std::size_t d = 0; d < z.width(); ++d) t.at(d, f) = row[d];
  }

  const nn::Tensor y = run_generator(t);

  McepSequence out = z;
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t d = 0; d < z.width(); ++d) out.coeffs(f, d) = y.at(d, f);
  out = denormalize(out, feature_stats);
  if (features.energy_passthrough) {
    for (std::size_t f = 0; f < frames; ++f) out.coeffs(f, 0) = m.coeffs(f, 0);
  }
  return out;
}

}  // namespace sanitone
