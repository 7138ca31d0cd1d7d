#include "mashup/checkpoint.hpp"

#include "mashup/errors.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace mashup;
using namespace mashup::test;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "mashup-ckpt-tests";
  fs::create_directories(dir);
  return dir;
}

CheckpointRecord sample_record(std::uint64_t seed, std::string id = "ck") {
  CheckpointRecord record;
  record.id = std::move(id);
  record.params = random_set(seed, {{"layer0.weight", 12}, {"layer0.bias", 4}});
  record.params.entries[0].spec.shape = {4, 3};
  record.kind = CheckpointKind::full;
  record.task_name = "t0";
  record.train_config_hash = hash_hex("{}");
  return record;
}

CheckpointRecord sample_lora_record(std::uint64_t seed, int rank, std::string id = "lk") {
  CheckpointRecord record;
  record.id = std::move(id);
  Rng rng(seed);
  Eigen::VectorXf a(rank * 3);
  Eigen::VectorXf b(4 * rank);
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = static_cast<float>(rng.normal());
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = static_cast<float>(rng.normal());
  record.params.add(TensorSpec{"layer0.lora_A", {rank, 3}}, std::move(a));
  record.params.add(TensorSpec{"layer0.lora_B", {4, rank}}, std::move(b));
  record.kind = CheckpointKind::lora;
  record.base_id = "base";
  record.task_name = "t1";
  record.lora_meta = LoraMeta{rank, 2.0f * rank, {"layer0"}};
  record.train_config_hash = hash_hex("{}");
  return record;
}

}  // namespace

TEST_CASE("save/load round-trip is bit-exact") {
  const fs::path path = temp_dir() / "roundtrip.mash";
  fs::remove(path);
  const CheckpointRecord record = sample_record(5);
  save_checkpoint(record, path);
  const CheckpointRecord loaded = load_checkpoint(path);
  CHECK(loaded == record);
}

TEST_CASE("save refuses to overwrite unless asked") {
  const fs::path path = temp_dir() / "exists.mash";
  fs::remove(path);
  const CheckpointRecord record = sample_record(6);
  save_checkpoint(record, path);
  CHECK_THROWS_AS(save_checkpoint(record, path), FormatError);
  CHECK_NOTHROW(save_checkpoint(record, path, /*overwrite=*/true));
}

TEST_CASE("library index lists what was added") {
  const fs::path dir = temp_dir() / "lib";
  fs::remove_all(dir);
  add_to_library(dir, sample_record(7, "a"));
  add_to_library(dir, sample_record(8, "b"));
  const LibraryIndex index = read_library_index(dir);
  CHECK(index.entries.size() == 2);
  CHECK(index.find("a") != nullptr);
  CHECK(index.find("b") != nullptr);
  CHECK(load_library(dir).size() == 2);
  CHECK(load_from_library(dir, "b").id == "b");
}

TEST_CASE("corrupt magic bytes fail with a format error, not a crash") {
  const fs::path path = temp_dir() / "magic.mash";
  fs::remove(path);
  save_checkpoint(sample_record(9), path);

  // Fuzz every byte of the header region one at a time.
  std::ifstream in(path, std::ios::binary);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  for (std::size_t i = 0; i < 4; ++i) {
    std::string corrupted = blob;
    corrupted[i] ^= 0x5a;
    const fs::path bad = temp_dir() / "magic-bad.mash";
    std::ofstream out(bad, std::ios::binary | std::ios::trunc);
    out << corrupted;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
  }
}

TEST_CASE("truncated file fails with a format error carrying an offset") {
  const fs::path path = temp_dir() / "trunc.mash";
  fs::remove(path);
  save_checkpoint(sample_record(10), path);
  std::ifstream in(path, std::ios::binary);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  for (const std::size_t keep : {std::size_t{8}, blob.size() / 2, blob.size() - 3}) {
    const fs::path bad = temp_dir() / "trunc-bad.mash";
    std::ofstream out(bad, std::ios::binary | std::ios::trunc);
    out << blob.substr(0, keep);
    out.close();
    try {
      load_checkpoint(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() != FormatError::npos);
    }
  }
}

TEST_CASE("manifest shape mismatch vs payload length is rejected") {
  const fs::path path = temp_dir() / "shape.mash";
  fs::remove(path);
  save_checkpoint(sample_record(11), path);
  std::ifstream in(path, std::ios::binary);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  // Inflate a declared dimension so elements overrun the payload.
  const auto pos = blob.find("[4,3]");
  REQUIRE(pos != std::string::npos);
  blob.replace(pos, 5, "[9,3]");
  // keep the manifest length field consistent (same byte count)
  const fs::path bad = temp_dir() / "shape-bad.mash";
  std::ofstream out(bad, std::ios::binary | std::ios::trunc);
  out << blob;
  out.close();
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
}

TEST_CASE("unsupported container version is reported explicitly") {
  const fs::path path = temp_dir() / "version.mash";
  fs::remove(path);
  save_checkpoint(sample_record(12), path);
  std::fstream io(path, std::ios::binary | std::ios::in | std::ios::out);
  io.seekp(4);
  const std::uint32_t v2 = 2;
  io.write(reinterpret_cast<const char*>(&v2), 4);
  io.close();
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), FormatError);
}

TEST_CASE("validate_compatibility reports the first mismatching field") {
  const CheckpointRecord a = sample_lora_record(1, 8, "a");

  SUBCASE("identical records are compatible") {
    const CheckpointRecord b = sample_lora_record(1, 8, "b");
    const CompatReport r = validate_compatibility(a, b);
    CHECK(r.ok);
    CHECK(r.mismatch.empty());
  }
  SUBCASE("rank mismatch") {
    const CheckpointRecord b = sample_lora_record(1, 4, "b");
    const CompatReport r = validate_compatibility(a, b);
    CHECK_FALSE(r.ok);
    CHECK(r.mismatch == "rank");
  }
  SUBCASE("full vs lora") {
    const CheckpointRecord b = sample_record(2, "b");
    CompatReport r = validate_compatibility(a, b);
    CHECK_FALSE(r.ok);
    CHECK(r.mismatch == "kind");
  }
  SUBCASE("alpha mismatch") {
    CheckpointRecord b = sample_lora_record(1, 8, "b");
    b.lora_meta->alpha = 32.0f;
    const CompatReport r = validate_compatibility(a, b);
    CHECK_FALSE(r.ok);
    CHECK(r.mismatch == "alpha");
  }
}

TEST_CASE("lora record invariants are enforced") {
  CheckpointRecord bad = sample_lora_record(3, 8);
  bad.lora_meta->rank = 4;  // tensors still carry rank 8
  CHECK_THROWS_AS(validate_record(bad), FormatError);

  CheckpointRecord no_meta = sample_lora_record(3, 8);
  no_meta.lora_meta.reset();
  CHECK_THROWS_AS(validate_record(no_meta), FormatError);

  CheckpointRecord full_with_meta = sample_record(4);
  full_with_meta.lora_meta = LoraMeta{};
  CHECK_THROWS_AS(validate_record(full_with_meta), FormatError);
}

TEST_CASE("round-trip property over randomized records") {
  const fs::path path = temp_dir() / "prop.mash";
  Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    fs::remove(path);
    CheckpointRecord record;
    record.id = "r" + std::to_string(trial);
    record.task_name = "t" + std::to_string(trial % 3);
    const int tensors = 1 + static_cast<int>(rng.below(4));
    for (int t = 0; t < tensors; ++t) {
      const int rows = 1 + static_cast<int>(rng.below(6));
      const int cols = 1 + static_cast<int>(rng.below(6));
      Eigen::VectorXf v(rows * cols);
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<float>(rng.normal());
      record.params.add(TensorSpec{"tensor" + std::to_string(t), {rows, cols}}, std::move(v));
    }
    record.train_config_hash = hash_hex(std::to_string(trial));
    save_checkpoint(record, path);
    CHECK(load_checkpoint(path) == record);
  }
}
