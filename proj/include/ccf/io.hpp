#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccf/tensor.hpp"

namespace ccf {

namespace fs = std::filesystem;

// EDC3 envelope: "EDC3", u8 version (1), u8 kind, then a kind-specific
// little-endian header and payload.
inline constexpr std::uint8_t kEdcVersion = 1;
inline constexpr std::uint8_t kEdcTensor = 1;
inline constexpr std::uint8_t kEdcLabels = 2;

std::vector<std::uint8_t> encode_belief_tensor(const BeliefTensor& tensor);
BeliefTensor decode_belief_tensor(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");
std::vector<std::uint8_t> encode_label_map(const LabelMap& labels);
LabelMap decode_label_map(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");

void write_belief_tensor(const BeliefTensor& tensor, const fs::path& path);
BeliefTensor read_belief_tensor(const fs::path& path);
void write_label_map(const LabelMap& labels, const fs::path& path);
LabelMap read_label_map(const fs::path& path);

struct SplitItem {
  std::vector<fs::path> tensors;  // one per classifier
  fs::path labels;
};

struct DatasetManifest {
  std::vector<std::string> classifiers;
  int classes = 0;
  std::vector<std::uint16_t> ignore;
  std::map<std::string, std::vector<SplitItem>> splits;
  fs::path base_dir;  // relative paths resolve here

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
};

DatasetManifest manifest_from_json(const nlohmann::json& j, const fs::path& base_dir);
nlohmann::json to_json(const DatasetManifest& manifest);
DatasetManifest read_manifest(const fs::path& path);
void write_manifest(const DatasetManifest& manifest, const fs::path& path);

// Loads and validates a split: shapes, class count, softmax invariants and
// label range. Throws UsageError for an unknown or empty split.
Dataset load_split(const DatasetManifest& manifest, const std::string& split);

nlohmann::json read_json(const fs::path& path);
// Deterministic output: sorted keys, two-space indent, trailing newline.
void write_json(const nlohmann::json& j, const fs::path& path);
void write_text(const std::string& text, const fs::path& path);

}  // namespace ccf
