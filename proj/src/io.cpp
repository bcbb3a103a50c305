#include "rsesf/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rsesf/error.hpp"

namespace rsesf {

namespace {

static_assert(std::endian::native == std::endian::little,
              "TEN1 I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  out.append(bytes, 4);
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (bytes.size() - pos < n) throw FormatError(std::string("truncated ") + what, pos);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArgumentError("write failed for " + path.string());
}

// ---- TEN1 ----

void write_tensor(std::ostream& out, const Tensor& tensor) {
  if (tensor.rank() == 0) throw ArgumentError("TEN1 cannot store a rank-0 tensor");
  std::string bytes = "TEN1";
  put_u32(bytes, static_cast<std::uint32_t>(tensor.rank()));
  for (auto d : tensor.shape()) put_u32(bytes, static_cast<std::uint32_t>(d));
  const auto values = tensor.values();
  bytes.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_tensor(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  Reader r{bytes};
  r.need(4, "magic");
  if (bytes.compare(0, 4, "TEN1") != 0) throw FormatError("bad TEN1 magic", 0);
  r.pos = 4;
  const std::uint32_t rank = r.u32("rank");
  if (rank == 0) throw FormatError("TEN1 rank must be at least 1", 4);
  if (rank > 16) throw FormatError("TEN1 rank " + std::to_string(rank) + " is implausible", 4);
  std::vector<std::size_t> shape;
  std::size_t count = 1;
  for (std::uint32_t a = 0; a < rank; ++a) {
    const std::size_t at = r.pos;
    shape.push_back(r.u32("dims"));
    if (shape.back() != 0 && count > (std::size_t{1} << 40) / shape.back()) {
      throw FormatError("TEN1 dims too large", at);
    }
    count *= shape.back();
  }
  const std::size_t payload = count * sizeof(double);
  if (bytes.size() - r.pos != payload) {
    throw FormatError("TEN1 payload has " + std::to_string(bytes.size() - r.pos) +
                          " bytes, expected " + std::to_string(payload),
                      r.pos);
  }
  std::vector<double> values(count);
  if (count) std::memcpy(values.data(), bytes.data() + r.pos, payload);
  return Tensor(std::move(shape), std::move(values));
}

void save_tensor(const fs::path& path, const Tensor& tensor) {
  std::ostringstream out;
  write_tensor(out, tensor);
  write_file(path, out.str());
}

Tensor load_tensor(const fs::path& path) {
  std::istringstream in(read_file(path));
  return read_tensor(in);
}

// ---- PGM / PPM ----

namespace {

struct PnmHeader {
  int channels = 1;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("expected P5 or P6 magic", 0);
  }
  PnmHeader h;
  h.channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  auto next_number = [&](const char* what) -> std::size_t {
    while (pos < bytes.size()) {
      if (is_space(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    std::size_t value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (value > 1'000'000) throw FormatError(std::string(what) + " too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("expected ") + what, start);
    return value;
  };
  h.width = next_number("width");
  h.height = next_number("height");
  const std::size_t maxval_at = pos;
  const std::size_t maxval = next_number("maxval");
  if (maxval != 255) throw FormatError("only maxval 255 is supported", maxval_at);
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    throw FormatError("expected whitespace after maxval", pos);
  }
  h.data_offset = pos + 1;
  if (h.width == 0 || h.height == 0) throw FormatError("empty image", maxval_at);
  const std::size_t expected = h.width * h.height * static_cast<std::size_t>(h.channels);
  if (bytes.size() - h.data_offset != expected) {
    throw FormatError("pixel data has " + std::to_string(bytes.size() - h.data_offset) +
                          " bytes, expected " + std::to_string(expected),
                      h.data_offset);
  }
  return h;
}

}  // namespace

Tensor decode_pnm(const std::string& bytes) {
  const auto h = parse_pnm_header(bytes);
  const auto c = static_cast<std::size_t>(h.channels);
  Tensor out({c, h.height, h.width});
  const std::size_t area = h.height * h.width;
  for (std::size_t p = 0; p < area; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const auto level = static_cast<unsigned char>(bytes[h.data_offset + p * c + ch]);
      out[ch * area + p] = static_cast<double>(level) / 255.0;
    }
  }
  return out;
}

std::string encode_pnm(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ShapeError("PNM images must be [1, H, W] or [3, H, W]");
  }
  const std::size_t c = image.dim(0);
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  std::string out = (c == 1 ? "P5\n" : "P6\n") + std::to_string(w) + " " + std::to_string(h) +
                    "\n255\n";
  const std::size_t area = h * w;
  for (std::size_t p = 0; p < area; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double v = std::clamp(image[ch * area + p], 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  return out;
}

void save_image(const fs::path& path, const Tensor& image) { write_file(path, encode_pnm(image)); }

Tensor load_image(const fs::path& path) { return decode_pnm(read_file(path)); }

void save_mask(const fs::path& path, const LabelMap& mask) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                    "\n255\n";
  for (int label : mask.labels) {
    if (label < 0 || label > 254) throw ArgumentError("mask labels must be in 0..254");
    out.push_back(static_cast<char>(static_cast<unsigned char>(label)));
  }
  write_file(path, out);
}

LabelMap load_mask(const fs::path& path) {
  const std::string bytes = read_file(path);
  const auto h = parse_pnm_header(bytes);
  if (h.channels != 1) throw FormatError("masks must be P5", 0);
  LabelMap mask(h.height, h.width);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    mask.labels[p] = static_cast<unsigned char>(bytes[h.data_offset + p]);
  }
  return mask;
}

// ---- manifest ----

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  const std::string text = read_file(path);
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::istringstream lines(text);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(lines, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream fields(t);
    std::string image, mask, extra;
    if (!(fields >> image >> mask) || (fields >> extra)) {
      throw FormatError("manifest lines must be 'image_path mask_path'", line_start);
    }
    auto resolve = [&](const std::string& p) {
      const fs::path q(p);
      return q.is_absolute() ? q : base / q;
    };
    entries.push_back({resolve(image), resolve(mask)});
  }
  return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    if (e.image.string().find_first_of(" \t\n") != std::string::npos ||
        e.mask.string().find_first_of(" \t\n") != std::string::npos) {
      throw ArgumentError("manifest paths may not contain whitespace");
    }
    out += e.image.generic_string() + " " + e.mask.generic_string() + "\n";
  }
  write_file(path, out);
}

std::vector<LabeledImage> load_dataset(const fs::path& manifest) {
  std::vector<LabeledImage> data;
  for (const auto& e : read_manifest(manifest)) {
    LabeledImage sample{load_image(e.image), load_mask(e.mask)};
    if (sample.mask.height != sample.image.dim(1) || sample.mask.width != sample.image.dim(2)) {
      throw FormatError("mask " + e.mask.string() + " does not match its image");
    }
    data.push_back(std::move(sample));
  }
  return data;
}

// ---- key=value ----

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream lines(text);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(lines, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    const auto hash = line.find('#');
    const std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw FormatError(origin + ": expected key=value", line_start);
    }
    const std::string key = trim(t.substr(0, eq));
    if (!kv.emplace(key, trim(t.substr(eq + 1))).second) {
      throw FormatError(origin + ": duplicate key '" + key + "'", line_start);
    }
  }
  return kv;
}

KeyValues read_key_values(const fs::path& path) {
  return parse_key_values(read_file(path), path.string());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw ArgumentError("not a number: '" + text + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& text) {
  const std::string t = trim(text);
  std::size_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw ArgumentError("not a non-negative integer: '" + text + "'");
  }
  return v;
}

namespace {

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream ss(text);
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

template <class T>
std::string join(const std::vector<T>& values, std::string (*fmt)(T)) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += fmt(values[i]);
  }
  return out;
}

std::string size_to_string(std::size_t v) { return std::to_string(v); }

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& p : split_commas(text)) out.push_back(parse_double(p));
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& p : split_commas(text)) out.push_back(parse_size(p));
  return out;
}

void write_model_config(KeyValues& kv, const ModelConfig& config) {
  kv["input_channels"] = std::to_string(config.input_channels);
  kv["channels"] = join(config.channels, size_to_string);
  kv["order"] = std::to_string(config.order);
  kv["scale_edges"] = join(config.scale_edges, format_double);
  kv["r_train"] = std::to_string(config.r_train);
  kv["r_infer"] = std::to_string(config.r_infer);
  kv["classes"] = std::to_string(config.classes);
  kv["hidden_mode"] = to_string(config.hidden_mode);
  kv["reduction"] = to_string(config.reduction);
}

bool assign_model_config(ModelConfig& config, const std::string& key, const std::string& value) {
  if (key == "input_channels") {
    config.input_channels = parse_size(value);
  } else if (key == "channels") {
    config.channels = parse_size_list(value);
  } else if (key == "order") {
    config.order = static_cast<int>(parse_size(value));
  } else if (key == "scale_edges") {
    config.scale_edges = parse_double_list(value);
  } else if (key == "r_train") {
    config.r_train = parse_size(value);
  } else if (key == "r_infer") {
    config.r_infer = parse_size(value);
  } else if (key == "classes") {
    config.classes = parse_size(value);
  } else if (key == "hidden_mode") {
    config.hidden_mode = parse_hidden_mode(value);
  } else if (key == "reduction") {
    config.reduction = parse_reduction(value);
  } else {
    return false;
  }
  return true;
}

// ---- filter banks and checkpoints ----

namespace {

const std::string& require(const KeyValues& kv, const std::string& key, const fs::path& origin) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(origin.string() + ": missing key '" + key + "'");
  return it->second;
}

}  // namespace

void save_filter_bank(const fs::path& dir, const std::string& stem, const FilterBank& bank) {
  bank.validate();
  KeyValues kv;
  kv["layer_index"] = std::to_string(bank.layer_index);
  kv["c_out"] = std::to_string(bank.c_out);
  kv["c_in"] = std::to_string(bank.c_in);
  kv["N"] = std::to_string(bank.order);
  kv["R"] = std::to_string(bank.rotation.count);
  kv["groups"] = std::to_string(bank.gamma());
  for (std::size_t k = 0; k < bank.gamma(); ++k) {
    const auto& g = bank.scale_groups[k];
    const std::string p = "group" + std::to_string(k) + "_";
    kv[p + "a"] = format_double(g.upper());
    kv[p + "b"] = format_double(g.lower());
    kv[p + "x"] = format_double(g.logit());
  }
  write_file(dir / (stem + ".txt"), format_key_values(kv));
  save_tensor(dir / (stem + "_alpha.ten"), bank.alpha);
}

FilterBank load_filter_bank(const fs::path& dir, const std::string& stem) {
  const fs::path header = dir / (stem + ".txt");
  const auto kv = read_key_values(header);
  try {
    FilterBank bank;
    bank.layer_index = static_cast<int>(parse_size(require(kv, "layer_index", header)));
    bank.c_out = parse_size(require(kv, "c_out", header));
    bank.c_in = parse_size(require(kv, "c_in", header));
    bank.order = static_cast<int>(parse_size(require(kv, "N", header)));
    bank.rotation.count = parse_size(require(kv, "R", header));
    const std::size_t groups = parse_size(require(kv, "groups", header));
    for (std::size_t k = 0; k < groups; ++k) {
      const std::string p = "group" + std::to_string(k) + "_";
      bank.scale_groups.emplace_back(parse_double(require(kv, p + "a", header)),
                                     parse_double(require(kv, p + "b", header)),
                                     parse_double(require(kv, p + "x", header)));
    }
    bank.alpha = load_tensor(dir / (stem + "_alpha.ten"));
    bank.validate();
    return bank;
  } catch (const std::invalid_argument& e) {
    throw FormatError(header.string() + ": " + e.what());
  }
}

void save_checkpoint(const fs::path& dir, const Model& model) {
  fs::create_directories(dir);
  KeyValues kv;
  write_model_config(kv, model.config);
  kv["format"] = "rsesf-checkpoint-1";
  kv["rotations"] = std::to_string(model.rotations());
  kv["eta_logits"] = join(model.scale_weights.logits, format_double);
  write_file(dir / "model.txt", format_key_values(kv));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    save_filter_bank(dir, "layer" + std::to_string(l + 1), model.layers[l]);
  }
  save_tensor(dir / "head_weights.ten", model.head.weights);
  save_tensor(dir / "head_bias.ten", model.head.bias);
}

Model load_checkpoint(const fs::path& dir) {
  const fs::path header = dir / "model.txt";
  const auto kv = read_key_values(header);
  Model model;
  try {
    if (require(kv, "format", header) != "rsesf-checkpoint-1") {
      throw FormatError(header.string() + ": unsupported checkpoint format");
    }
    for (const auto& [key, value] : kv) {
      if (key == "format" || key == "rotations" || key == "eta_logits") continue;
      if (!assign_model_config(model.config, key, value)) {
        throw FormatError(header.string() + ": unknown key '" + key + "'");
      }
    }
    model.config.validate();
    model.scale_weights.logits = parse_double_list(require(kv, "eta_logits", header));
    const std::size_t rotations = parse_size(require(kv, "rotations", header));
    for (std::size_t l = 0; l < model.config.depth(); ++l) {
      model.layers.push_back(load_filter_bank(dir, "layer" + std::to_string(l + 1)));
      const auto& bank = model.layers.back();
      const std::size_t c_in = l == 0 ? model.config.input_channels : model.config.channels[l - 1];
      if (bank.rotation.count != rotations || bank.c_out != model.config.channels[l] ||
          bank.c_in != c_in || bank.order != model.config.order ||
          bank.gamma() != model.config.gamma()) {
        throw FormatError(header.string() + ": layer " + std::to_string(l + 1) +
                          " does not match the model configuration");
      }
    }
  } catch (const std::invalid_argument& e) {
    throw FormatError(header.string() + ": " + e.what());
  }
  model.head.weights = load_tensor(dir / "head_weights.ten");
  model.head.bias = load_tensor(dir / "head_bias.ten");
  const std::size_t c_last = model.config.channels.back();
  if (model.head.weights.shape() != std::vector<std::size_t>{model.config.classes, c_last} ||
      model.head.bias.shape() != std::vector<std::size_t>{model.config.classes} ||
      model.scale_weights.logits.size() != model.config.gamma()) {
    throw FormatError(dir.string() + ": checkpoint tensors do not match model.txt");
  }
  return model;
}

}  // namespace rsesf
