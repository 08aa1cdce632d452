#include "ccf/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ccf/error.hpp"

namespace ccf {

namespace {

static_assert(std::endian::native == std::endian::little, "EDC3 I/O assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'D', 'C', '3'};
constexpr std::size_t kEnvelope = 6;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const std::string& name) : bytes_(bytes), name_(name) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(name_ + ": truncated " + what, pos_);
  }
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
  const std::uint8_t* take(std::size_t n, const char* what) {
    need(n, what);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }
  const std::string& name() const { return name_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

void read_envelope(Reader& r, std::uint8_t kind) {
  r.need(4, "magic");
  const std::uint8_t* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(r.name() + ": bad magic (expected EDC3)", 0);
  const std::uint8_t version = r.u8("version");
  if (version != kEdcVersion) {
    throw FormatError(r.name() + ": unsupported version " + std::to_string(version), r.pos() - 1);
  }
  const std::uint8_t k = r.u8("kind");
  if (k != kind) {
    throw FormatError(r.name() + ": kind " + std::to_string(k) + ", expected " + std::to_string(kind), r.pos() - 1);
  }
}

void check_end(const Reader& r) {
  if (r.pos() != r.size()) throw FormatError(r.name() + ": trailing bytes after payload", r.pos());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void check_dims(std::uint64_t a, std::uint64_t b, std::uint64_t c, const Reader& r, std::size_t offset) {
  if (a == 0 || b == 0 || c == 0) throw FormatError(r.name() + ": zero dimension in header", offset);
  if (a > (1u << 31) || b > (1u << 31) || a * b * c > (std::uint64_t(1) << 34)) {
    throw FormatError(r.name() + ": header dimensions too large", offset);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_belief_tensor(const BeliefTensor& tensor) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kEdcVersion);
  out.push_back(kEdcTensor);
  put_u32(out, static_cast<std::uint32_t>(tensor.height()));
  put_u32(out, static_cast<std::uint32_t>(tensor.width()));
  put_u32(out, static_cast<std::uint32_t>(tensor.classes()));
  const std::size_t n = static_cast<std::size_t>(tensor.values().size());
  const std::size_t at = out.size();
  out.resize(at + 4 * n);
  std::memcpy(out.data() + at, tensor.values().data(), 4 * n);
  return out;
}

BeliefTensor decode_belief_tensor(std::span<const std::uint8_t> bytes, const std::string& name) {
  Reader r(bytes, name);
  read_envelope(r, kEdcTensor);
  const std::size_t header_at = r.pos();
  const std::uint32_t h = r.u32("header (H)");
  const std::uint32_t w = r.u32("header (W)");
  const std::uint32_t m = r.u32("header (M)");
  check_dims(h, w, m, r, header_at);
  const std::size_t n = std::size_t(h) * w * m;
  const std::uint8_t* payload = r.take(4 * n, "payload");
  BeliefTensor t(static_cast<int>(h), static_cast<int>(w), static_cast<int>(m));
  std::memcpy(t.values().data(), payload, 4 * n);
  check_end(r);
  return t;
}

std::vector<std::uint8_t> encode_label_map(const LabelMap& labels) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kEdcVersion);
  out.push_back(kEdcLabels);
  put_u32(out, static_cast<std::uint32_t>(labels.height()));
  put_u32(out, static_cast<std::uint32_t>(labels.width()));
  const std::size_t n = static_cast<std::size_t>(labels.pixels());
  const std::size_t at = out.size();
  out.resize(at + 2 * n);
  std::memcpy(out.data() + at, labels.labels().data(), 2 * n);
  return out;
}

LabelMap decode_label_map(std::span<const std::uint8_t> bytes, const std::string& name) {
  Reader r(bytes, name);
  read_envelope(r, kEdcLabels);
  const std::size_t header_at = r.pos();
  const std::uint32_t h = r.u32("header (H)");
  const std::uint32_t w = r.u32("header (W)");
  check_dims(h, w, 1, r, header_at);
  const std::size_t n = std::size_t(h) * w;
  const std::uint8_t* payload = r.take(2 * n, "payload");
  LabelMap map(static_cast<int>(h), static_cast<int>(w));
  std::memcpy(map.labels().data(), payload, 2 * n);
  check_end(r);
  return map;
}

void write_belief_tensor(const BeliefTensor& tensor, const fs::path& path) {
  write_bytes(encode_belief_tensor(tensor), path);
}

BeliefTensor read_belief_tensor(const fs::path& path) { return decode_belief_tensor(read_bytes(path), path.string()); }

void write_label_map(const LabelMap& labels, const fs::path& path) { write_bytes(encode_label_map(labels), path); }

LabelMap read_label_map(const fs::path& path) { return decode_label_map(read_bytes(path), path.string()); }

DatasetManifest manifest_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    m.classifiers = j.at("classifiers").get<std::vector<std::string>>();
    m.classes = j.at("classes").get<int>();
    if (j.contains("ignore")) m.ignore = j.at("ignore").get<std::vector<std::uint16_t>>();
    for (const auto& [split, items] : j.at("splits").items()) {
      auto& list = m.splits[split];
      for (const auto& item : items) {
        SplitItem s;
        for (const auto& t : item.at("tensors")) s.tensors.emplace_back(t.get<std::string>());
        s.labels = item.at("labels").get<std::string>();
        list.push_back(std::move(s));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("manifest: ") + e.what());
  }
  if (m.classes < 1) throw UsageError("manifest: \"classes\" must be positive");
  if (m.classifiers.size() < 2) throw UsageError("manifest: at least two classifiers required");
  for (const auto& [split, items] : m.splits) {
    for (const auto& item : items) {
      if (item.tensors.size() != m.classifiers.size()) {
        throw UsageError("manifest: split '" + split + "' item lists " + std::to_string(item.tensors.size()) +
                         " tensors for " + std::to_string(m.classifiers.size()) + " classifiers");
      }
    }
  }
  return m;
}

nlohmann::json to_json(const DatasetManifest& manifest) {
  nlohmann::json j;
  j["classifiers"] = manifest.classifiers;
  j["classes"] = manifest.classes;
  j["ignore"] = manifest.ignore;
  j["splits"] = nlohmann::json::object();
  for (const auto& [split, items] : manifest.splits) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& item : items) {
      nlohmann::json e;
      e["tensors"] = nlohmann::json::array();
      for (const auto& t : item.tensors) e["tensors"].push_back(t.generic_string());
      e["labels"] = item.labels.generic_string();
      list.push_back(std::move(e));
    }
    j["splits"][split] = std::move(list);
  }
  return j;
}

DatasetManifest read_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = read_json(path);
  } catch (const DataError& e) {
    throw UsageError(std::string("manifest ") + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) { write_json(to_json(manifest), path); }

Dataset load_split(const DatasetManifest& manifest, const std::string& split) {
  auto it = manifest.splits.find(split);
  if (it == manifest.splits.end()) throw UsageError("manifest has no split '" + split + "'");
  if (it->second.empty()) throw UsageError("manifest split '" + split + "' is empty");
  Dataset data;
  for (const auto& item : it->second) {
    std::vector<BeliefTensor> tensors;
    const fs::path label_path = manifest.resolve(item.labels);
    LabelMap labels = read_label_map(label_path);
    for (const auto& t : item.tensors) {
      const fs::path p = manifest.resolve(t);
      BeliefTensor tensor = read_belief_tensor(p);
      if (tensor.classes() != manifest.classes) {
        throw DataError(p.string() + ": " + std::to_string(tensor.classes()) + " classes, manifest declares " +
                        std::to_string(manifest.classes));
      }
      if (tensor.height() != labels.height() || tensor.width() != labels.width()) {
        throw DataError(p.string() + ": shape differs from " + label_path.string());
      }
      check_belief_tensor(tensor, p.string());
      tensors.push_back(std::move(tensor));
    }
    for (Eigen::Index px = 0; px < labels.pixels(); ++px) {
      const std::uint16_t l = labels[px];
      if (l < manifest.classes || l == kIgnoreLabel) continue;
      if (std::find(manifest.ignore.begin(), manifest.ignore.end(), l) != manifest.ignore.end()) continue;
      throw DataError(label_path.string() + ": label " + std::to_string(l) + " >= class count at pixel (" +
                      std::to_string(px / labels.width()) + ", " + std::to_string(px % labels.width()) + ")");
    }
    data.images.push_back(std::move(tensors));
    data.labels.push_back(std::move(labels));
  }
  return data;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const nlohmann::json& j, const fs::path& path) { write_text(j.dump(2) + "\n", path); }

void write_text(const std::string& text, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace ccf
