#include "edl/checkpoint.hpp"

#include "edl/error.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace edl::nn {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace {

constexpr const char* kMagic = "edlseg-checkpoint 1";

std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::map<std::string, std::string> split_pairs(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("malformed network config token '" + tok + "'");
    if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second)
      throw ConfigError("duplicate network config key '" + tok.substr(0, eq) + "'");
  }
  return kv;
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw ConfigError("bad value '" + s + "' for network config key '" + key + "'");
  return v;
}

std::uint32_t to_le(float f) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
  return u;
}

float from_le(std::uint32_t u) {
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
  return std::bit_cast<float>(u);
}

}  // namespace

std::string describe(const UNetConfig& cfg) {
  std::string filters;
  for (std::size_t i = 0; i < cfg.filters.size(); ++i) filters += (i ? "," : "") + std::to_string(cfg.filters[i]);
  return "input_channels=" + std::to_string(cfg.input_channels) + " image_size=" + std::to_string(cfg.image_size) +
         " filters=" + filters + " bottleneck_filters=" + std::to_string(cfg.bottleneck_filters) +
         " dropout_rate=" + shortest(cfg.dropout_rate) + " head=" + to_string(cfg.head) +
         " activation=" + to_string(cfg.activation) + " seed=" + std::to_string(cfg.seed);
}

UNetConfig parse_unet_config(const std::string& line) {
  UNetConfig cfg;
  for (const auto& [k, v] : split_pairs(line)) {
    if (k == "input_channels") {
      cfg.input_channels = parse_number<int>(k, v);
    } else if (k == "image_size") {
      cfg.image_size = parse_number<int>(k, v);
    } else if (k == "filters") {
      cfg.filters.clear();
      std::size_t start = 0;
      while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto end = comma == std::string::npos ? v.size() : comma;
        cfg.filters.push_back(parse_number<int>(k, v.substr(start, end - start)));
        start = end + 1;
      }
    } else if (k == "bottleneck_filters") {
      cfg.bottleneck_filters = parse_number<int>(k, v);
    } else if (k == "dropout_rate") {
      cfg.dropout_rate = parse_number<double>(k, v);
    } else if (k == "head") {
      cfg.head = parse_head(v);
    } else if (k == "activation") {
      cfg.activation = parse_activation(v);
    } else if (k == "seed") {
      cfg.seed = parse_number<std::uint64_t>(k, v);
    } else {
      throw ConfigError("unknown network config key '" + k + "'");
    }
  }
  return cfg;
}

template <typename Scalar>
void save_checkpoint(const fs::path& path, const UNet<Scalar>& model, const std::string& provenance) {
  std::ostringstream head;
  if (!provenance.empty()) head << "# " << provenance << "\n";
  head << kMagic << "\nconfig " << describe(model.config()) << "\nparams " << model.params().size() << "\n";
  std::string blob;
  for (const auto& p : model.params().all()) {
    head << p.name << " ";
    for (std::size_t i = 0; i < p.shape.size(); ++i) head << (i ? "," : "") << p.shape[i];
    head << " " << blob.size() << "\n";
    for (Index i = 0; i < p.value.size(); ++i) {
      const std::uint32_t u = to_le(static_cast<float>(p.value.data()[i]));
      char b[4];
      std::memcpy(b, &u, 4);
      blob.append(b, 4);
    }
  }
  head << "end\n";

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open " + tmp.string() + " for writing");
    const std::string h = head.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    out.flush();
    if (!out) throw ParseError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw ParseError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
  }
}

template <typename Scalar>
UNet<Scalar> load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open checkpoint at byte offset 0");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();

  std::size_t pos = 0;
  auto fail = [&](const std::string& what, std::size_t at) -> void {
    throw ParseError(path.string() + ": " + what + " at byte offset " + std::to_string(at));
  };
  auto next_line = [&](std::size_t& start) {
    start = pos;
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) fail("unterminated manifest line", pos);
    pos = nl + 1;
    return bytes.substr(start, nl - start);
  };

  std::size_t at = 0;
  std::string line = next_line(at);
  while (!line.empty() && line[0] == '#') line = next_line(at);
  if (line != kMagic) fail("missing checkpoint magic", at);
  line = next_line(at);
  if (line.rfind("config ", 0) != 0) fail("expected config line", at);
  UNetConfig cfg;
  try {
    cfg = parse_unet_config(line.substr(7));
    cfg.validate();
  } catch (const std::exception& e) {
    fail(std::string("invalid config (") + e.what() + ")", at);
  }
  line = next_line(at);
  std::size_t count = 0;
  if (line.rfind("params ", 0) != 0 || std::from_chars(line.data() + 7, line.data() + line.size(), count).ec != std::errc{})
    fail("expected parameter count", at);

  UNet<Scalar> model(cfg);
  if (count != model.params().size()) fail("parameter count does not match config", at);
  struct Entry {
    std::size_t offset;
    std::size_t line_at;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    line = next_line(at);
    std::istringstream ls(line);
    std::string name, shape;
    std::size_t offset = 0;
    if (!(ls >> name >> shape >> offset)) fail("malformed parameter line", at);
    const auto& p = model.params()[i];
    std::string expect;
    for (std::size_t k = 0; k < p.shape.size(); ++k) expect += (k ? "," : "") + std::to_string(p.shape[k]);
    if (name != p.name || shape != expect) fail("parameter " + name + " " + shape + " does not match " + p.name, at);
    entries.push_back({offset, at});
  }
  line = next_line(at);
  if (line != "end") fail("expected end of manifest", at);

  const std::size_t blob_start = pos;
  for (std::size_t i = 0; i < count; ++i) {
    auto& p = model.params()[i];
    const std::size_t need = static_cast<std::size_t>(p.value.size()) * 4;
    if (entries[i].offset > bytes.size() - blob_start || bytes.size() - blob_start - entries[i].offset < need)
      fail("blob too short for parameter " + p.name, bytes.size());
    const char* src = bytes.data() + blob_start + entries[i].offset;
    for (Index k = 0; k < p.value.size(); ++k) {
      std::uint32_t u;
      std::memcpy(&u, src + 4 * k, 4);
      p.value.data()[k] = static_cast<Scalar>(from_le(u));
    }
  }
  return model;
}

template void save_checkpoint(const fs::path&, const UNet<float>&, const std::string&);
template void save_checkpoint(const fs::path&, const UNet<double>&, const std::string&);
template UNet<float> load_checkpoint(const fs::path&);
template UNet<double> load_checkpoint(const fs::path&);

}  // namespace edl::nn
