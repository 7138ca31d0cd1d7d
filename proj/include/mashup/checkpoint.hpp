#pragma once

#include "mashup/tensor.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mashup {

enum class CheckpointKind { full, lora };

std::string to_string(CheckpointKind kind);
CheckpointKind checkpoint_kind_from_string(const std::string& s);

struct LoraMeta {
  int rank = 8;
  float alpha = 16.0f;
  std::vector<std::string> target_modules;

  bool operator==(const LoraMeta&) const = default;
};

// A parameter set plus provenance. For kind=lora the params hold only the
// adapter factors ("<module>.lora_A" r x in, "<module>.lora_B" out x r);
// for kind=full they hold every weight and bias.
struct CheckpointRecord {
  std::string id;
  NamedParamSet params;
  CheckpointKind kind = CheckpointKind::full;
  std::string base_id;  // empty = absent
  std::string task_name;
  std::optional<LoraMeta> lora_meta;
  std::string train_config_hash;  // 16 hex chars (FNV-1a of canonical config JSON)

  bool operator==(const CheckpointRecord& other) const;
};

// Throws FormatError when the record violates its kind invariants
// (lora without meta, adapter tensor not matching rank, ...).
void validate_record(const CheckpointRecord& record);

// MASH container: magic "MASH", u32 LE version=1, u64 LE manifest length,
// UTF-8 JSON manifest, then raw little-endian f32 payload with every tensor
// 8-byte aligned. Refuses to overwrite an existing file unless asked.
void save_checkpoint(const CheckpointRecord& record, const std::filesystem::path& path,
                     bool overwrite = false);
CheckpointRecord load_checkpoint(const std::filesystem::path& path);

struct CompatReport {
  bool ok = false;
  std::string mismatch;  // empty when ok; first mismatching field/tensor otherwise
};

// Same kind, same base_id, compatible parameter sets, and (for lora)
// identical rank, alpha and target modules. Reports; never throws.
CompatReport validate_compatibility(const CheckpointRecord& a, const CheckpointRecord& b);

struct LibraryIndex {
  struct Entry {
    std::string id;
    std::string path;  // relative to the library directory
    CheckpointKind kind = CheckpointKind::full;
    std::string base_id;
    std::string task_name;
  };

  int format_version = 1;
  std::vector<Entry> entries;

  const Entry* find(std::string_view id) const;
};

LibraryIndex read_library_index(const std::filesystem::path& dir);
void write_library_index(const std::filesystem::path& dir, const LibraryIndex& index);

// Saves the record as <id>.mash inside dir and updates library.json.
void add_to_library(const std::filesystem::path& dir, const CheckpointRecord& record,
                    bool overwrite = false);
CheckpointRecord load_from_library(const std::filesystem::path& dir, const std::string& id);
std::vector<CheckpointRecord> load_library(const std::filesystem::path& dir);

// 64-bit FNV-1a rendered as 16 hex chars; used for train_config_hash.
std::string hash_hex(std::string_view canonical_json);

}  // namespace mashup
