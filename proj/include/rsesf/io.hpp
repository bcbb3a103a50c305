#pragma once

// File formats. Every writer is paired with a reader that reproduces the
// in-memory value bit for bit.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rsesf/filterbank.hpp"
#include "rsesf/image.hpp"
#include "rsesf/net.hpp"
#include "rsesf/tensor.hpp"

namespace rsesf {

namespace fs = std::filesystem;

// TEN1: "TEN1", u32 rank, u32 dims[rank], f64 data; all little-endian.
void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);
void save_tensor(const fs::path& path, const Tensor& tensor);
Tensor load_tensor(const fs::path& path);

/// Binary PGM (P5, one channel) or PPM (P6, three channels), maxval 255.
/// Values are clamped to [0, 1] and rounded to the nearest level.
void save_image(const fs::path& path, const Tensor& image);
/// Returns [C, H, W] with values level / 255.
Tensor load_image(const fs::path& path);
Tensor decode_pnm(const std::string& bytes);
std::string encode_pnm(const Tensor& image);

/// Masks are P5 files whose bytes are class indices (0..254).
void save_mask(const fs::path& path, const LabelMap& mask);
LabelMap load_mask(const fs::path& path);

/// Lines "image_path mask_path"; relative paths resolve against the manifest's directory.
struct ManifestEntry {
  fs::path image;
  fs::path mask;
};
std::vector<ManifestEntry> read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries);
std::vector<LabeledImage> load_dataset(const fs::path& manifest);

/// key=value lines; blank lines and '#' comments ignored. Duplicate keys are an error.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text, const std::string& origin = "<text>");
KeyValues read_key_values(const fs::path& path);
std::string format_key_values(const KeyValues& kv);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(const std::string& text);
std::size_t parse_size(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& text);

/// ModelConfig keys: input_channels, channels, order, scale_edges, r_train,
/// r_infer, classes, hidden_mode, reduction.
void write_model_config(KeyValues& kv, const ModelConfig& config);
/// Returns false when `key` is not a ModelConfig key.
bool assign_model_config(ModelConfig& config, const std::string& key, const std::string& value);

/// <stem>.txt header plus <stem>_alpha.ten.
void save_filter_bank(const fs::path& dir, const std::string& stem, const FilterBank& bank);
FilterBank load_filter_bank(const fs::path& dir, const std::string& stem);

/// Checkpoint directory: model.txt, layerN.txt / layerN_alpha.ten, head_weights.ten, head_bias.ten.
void save_checkpoint(const fs::path& dir, const Model& model);
Model load_checkpoint(const fs::path& dir);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& bytes);

}  // namespace rsesf
