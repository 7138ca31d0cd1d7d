#include "mashup/checkpoint.hpp"

#include "mashup/errors.hpp"
#include "mashup/rng.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "MASH container I/O assumes a little-endian host");

namespace mashup {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'A', 'S', 'H'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 16;  // magic + version + manifest length

std::uint64_t align8(std::uint64_t x) { return (x + 7) & ~std::uint64_t{7}; }

void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

void append_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

json lora_meta_to_json(const LoraMeta& meta) {
  return json{{"rank", meta.rank}, {"alpha", meta.alpha}, {"target_modules", meta.target_modules}};
}

LoraMeta lora_meta_from_json(const json& j) {
  LoraMeta meta;
  meta.rank = j.at("rank").get<int>();
  meta.alpha = j.at("alpha").get<float>();
  meta.target_modules = j.at("target_modules").get<std::vector<std::string>>();
  return meta;
}

}  // namespace

std::string to_string(CheckpointKind kind) {
  return kind == CheckpointKind::full ? "full" : "lora";
}

CheckpointKind checkpoint_kind_from_string(const std::string& s) {
  if (s == "full") return CheckpointKind::full;
  if (s == "lora") return CheckpointKind::lora;
  throw FormatError("unknown checkpoint kind '" + s + "'");
}

bool CheckpointRecord::operator==(const CheckpointRecord& other) const {
  return id == other.id && kind == other.kind && base_id == other.base_id &&
         task_name == other.task_name && lora_meta == other.lora_meta &&
         train_config_hash == other.train_config_hash && params == other.params;
}

void validate_record(const CheckpointRecord& record) {
  if (record.kind == CheckpointKind::full) {
    if (record.lora_meta.has_value()) {
      throw FormatError("record '" + record.id + "': kind=full must not carry lora metadata");
    }
    return;
  }
  if (!record.lora_meta.has_value()) {
    throw FormatError("record '" + record.id + "': kind=lora requires lora metadata");
  }
  const LoraMeta& meta = *record.lora_meta;
  for (const auto& e : record.params.entries) {
    const std::string& name = e.spec.name;
    const auto dot = name.rfind('.');
    const std::string module = dot == std::string::npos ? "" : name.substr(0, dot);
    const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
    const bool is_a = leaf == "lora_A";
    const bool is_b = leaf == "lora_B";
    if (!is_a && !is_b) {
      throw FormatError("record '" + record.id + "': tensor '" + name +
                        "' is not a lora_A/lora_B factor");
    }
    bool targeted = false;
    for (const auto& m : meta.target_modules) targeted = targeted || m == module;
    if (!targeted) {
      throw FormatError("record '" + record.id + "': tensor '" + name +
                        "' does not match any target module");
    }
    if (e.spec.shape.size() != 2) {
      throw FormatError("record '" + record.id + "': tensor '" + name + "' must be 2-D");
    }
    const int r_dim = is_a ? e.spec.shape[0] : e.spec.shape[1];
    if (r_dim != meta.rank) {
      throw FormatError("record '" + record.id + "': tensor '" + name + "' rank dimension " +
                        std::to_string(r_dim) + " != configured rank " +
                        std::to_string(meta.rank));
    }
  }
}

void save_checkpoint(const CheckpointRecord& record, const std::filesystem::path& path,
                     bool overwrite) {
  validate_record(record);
  if (!overwrite && std::filesystem::exists(path)) {
    throw FormatError("refusing to overwrite existing file " + path.string());
  }

  // Manifest first: tensor offsets are relative to the payload start, which
  // itself is the 8-byte aligned position after the manifest.
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& e : record.params.entries) {
    tensors.push_back(json{{"name", e.spec.name}, {"shape", e.spec.shape}, {"offset", offset}});
    offset = align8(offset + 4 * static_cast<std::uint64_t>(e.spec.elem_count()));
  }
  json manifest{
      {"id", record.id},
      {"kind", to_string(record.kind)},
      {"task_name", record.task_name},
      {"train_config_hash", record.train_config_hash},
      {"tensors", tensors},
  };
  if (!record.base_id.empty()) manifest["base_id"] = record.base_id;
  if (record.lora_meta) manifest["lora"] = lora_meta_to_json(*record.lora_meta);

  const std::string manifest_bytes = manifest.dump();

  std::string blob;
  blob.reserve(kHeaderSize + manifest_bytes.size() + offset + 8);
  blob.append(kMagic, 4);
  append_u32(blob, kVersion);
  append_u64(blob, manifest_bytes.size());
  blob += manifest_bytes;
  blob.resize(align8(blob.size()), '\0');  // pad so the payload is 8-aligned

  const std::size_t payload_start = blob.size();
  blob.resize(payload_start + offset, '\0');
  for (std::size_t i = 0, pos = 0; i < record.params.entries.size(); ++i) {
    const auto& e = record.params.entries[i];
    const std::size_t bytes = 4 * static_cast<std::size_t>(e.spec.elem_count());
    std::memcpy(blob.data() + payload_start + pos, e.values.data(), bytes);
    pos = align8(pos + bytes);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

CheckpointRecord load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (blob.size() < kHeaderSize) throw FormatError("truncated header", blob.size());
  if (std::memcmp(blob.data(), kMagic, 4) != 0) throw FormatError("bad magic bytes", 0);
  std::uint32_t version;
  std::memcpy(&version, blob.data() + 4, 4);
  if (version > kVersion) {
    throw FormatError("unsupported container version " + std::to_string(version), 4);
  }
  std::uint64_t manifest_len;
  std::memcpy(&manifest_len, blob.data() + 8, 8);
  if (kHeaderSize + manifest_len > blob.size()) {
    throw FormatError("truncated manifest", blob.size());
  }

  json manifest;
  try {
    manifest = json::parse(blob.begin() + kHeaderSize,
                           blob.begin() + static_cast<std::ptrdiff_t>(kHeaderSize + manifest_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest parse error: ") + e.what(), kHeaderSize);
  }

  CheckpointRecord record;
  const std::uint64_t payload_start = align8(kHeaderSize + manifest_len);
  try {
    record.id = manifest.at("id").get<std::string>();
    record.kind = checkpoint_kind_from_string(manifest.at("kind").get<std::string>());
    record.task_name = manifest.at("task_name").get<std::string>();
    record.train_config_hash = manifest.at("train_config_hash").get<std::string>();
    record.base_id = manifest.value("base_id", std::string());
    if (manifest.contains("lora")) record.lora_meta = lora_meta_from_json(manifest.at("lora"));

    for (const auto& t : manifest.at("tensors")) {
      TensorSpec spec;
      spec.name = t.at("name").get<std::string>();
      spec.shape = t.at("shape").get<std::vector<int>>();
      const std::uint64_t rel = t.at("offset").get<std::uint64_t>();
      if (spec.shape.empty()) throw FormatError("tensor '" + spec.name + "': empty shape");
      for (int d : spec.shape) {
        if (d <= 0) throw FormatError("tensor '" + spec.name + "': non-positive dimension");
      }
      const std::uint64_t bytes = 4 * static_cast<std::uint64_t>(spec.elem_count());
      const std::uint64_t begin = payload_start + rel;
      if (begin + bytes > blob.size()) {
        throw FormatError("tensor '" + spec.name + "' payload exceeds file size", begin);
      }
      Eigen::VectorXf values(spec.elem_count());
      std::memcpy(values.data(), blob.data() + begin, bytes);
      record.params.add(std::move(spec), std::move(values));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest field error: ") + e.what(), kHeaderSize);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("manifest/payload mismatch: ") + e.what(), payload_start);
  }

  validate_record(record);
  return record;
}

CompatReport validate_compatibility(const CheckpointRecord& a, const CheckpointRecord& b) {
  if (a.kind != b.kind) return {false, "kind"};
  if (a.base_id != b.base_id) return {false, "base_id"};
  if (a.kind == CheckpointKind::lora) {
    const LoraMeta& ma = *a.lora_meta;
    const LoraMeta& mb = *b.lora_meta;
    if (ma.rank != mb.rank) return {false, "rank"};
    if (ma.alpha != mb.alpha) return {false, "alpha"};
    if (ma.target_modules != mb.target_modules) return {false, "target_modules"};
  }
  if (auto mismatch = first_mismatch(a.params, b.params)) return {false, *mismatch};
  return {true, ""};
}

const LibraryIndex::Entry* LibraryIndex::find(std::string_view id) const {
  for (const Entry& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

LibraryIndex read_library_index(const std::filesystem::path& dir) {
  const auto file = dir / "library.json";
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("library index parse error: " + std::string(e.what()));
  }
  LibraryIndex index;
  index.format_version = j.at("format_version").get<int>();
  if (index.format_version > 1) {
    throw FormatError("unsupported library index version " +
                      std::to_string(index.format_version));
  }
  for (const auto& e : j.at("entries")) {
    LibraryIndex::Entry entry;
    entry.id = e.at("id").get<std::string>();
    entry.path = e.at("path").get<std::string>();
    entry.kind = checkpoint_kind_from_string(e.at("kind").get<std::string>());
    entry.base_id = e.value("base_id", std::string());
    entry.task_name = e.at("task_name").get<std::string>();
    if (index.find(entry.id) != nullptr) {
      throw FormatError("library index: duplicate id '" + entry.id + "'");
    }
    index.entries.push_back(std::move(entry));
  }
  return index;
}

void write_library_index(const std::filesystem::path& dir, const LibraryIndex& index) {
  json entries = json::array();
  for (const auto& e : index.entries) {
    json je{{"id", e.id},
            {"path", e.path},
            {"kind", to_string(e.kind)},
            {"task_name", e.task_name}};
    if (!e.base_id.empty()) je["base_id"] = e.base_id;
    entries.push_back(std::move(je));
  }
  json j{{"format_version", index.format_version}, {"entries", entries}};
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "library.json", std::ios::trunc);
  if (!out) throw FormatError("cannot write " + (dir / "library.json").string());
  out << j.dump(2) << "\n";
}

void add_to_library(const std::filesystem::path& dir, const CheckpointRecord& record,
                    bool overwrite) {
  std::filesystem::create_directories(dir);
  LibraryIndex index;
  if (std::filesystem::exists(dir / "library.json")) index = read_library_index(dir);

  const std::string filename = record.id + ".mash";
  save_checkpoint(record, dir / filename, overwrite);

  bool found = false;
  for (auto& e : index.entries) {
    if (e.id == record.id) {
      e = LibraryIndex::Entry{record.id, filename, record.kind, record.base_id, record.task_name};
      found = true;
    }
  }
  if (!found) {
    index.entries.push_back(
        LibraryIndex::Entry{record.id, filename, record.kind, record.base_id, record.task_name});
  }
  write_library_index(dir, index);
}

CheckpointRecord load_from_library(const std::filesystem::path& dir, const std::string& id) {
  const LibraryIndex index = read_library_index(dir);
  const auto* entry = index.find(id);
  if (entry == nullptr) throw SetupError("library has no checkpoint '" + id + "'");
  CheckpointRecord record = load_checkpoint(dir / entry->path);
  if (record.id != id) {
    throw FormatError("library entry '" + id + "' resolves to a file with id '" + record.id + "'");
  }
  return record;
}

std::vector<CheckpointRecord> load_library(const std::filesystem::path& dir) {
  const LibraryIndex index = read_library_index(dir);
  std::vector<CheckpointRecord> records;
  records.reserve(index.entries.size());
  for (const auto& entry : index.entries) {
    CheckpointRecord record = load_checkpoint(dir / entry.path);
    if (record.id != entry.id || record.kind != entry.kind) {
      throw FormatError("library entry '" + entry.id + "' does not validate against its file");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::string hash_hex(std::string_view canonical_json) {
  const std::uint64_t h = fnv1a64(canonical_json);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

}  // namespace mashup
