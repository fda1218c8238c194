#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "lambdapack/tile.hpp"

namespace lambdapack::store {

struct TileKey {
  std::string run_id;
  std::string matrix;
  std::vector<std::int64_t> indices;

  /// `run/matrix/i0_i1_...`. Identifiers never contain '/', and the indices
  /// are plain integers, so distinct keys never share a string.
  std::string to_string() const;
  friend auto operator<=>(const TileKey&, const TileKey&) = default;
};

/// Serialized form: "LPTILE01", u32 rows, u32 cols, rows*cols f64, all little-endian.
std::string encode_tile(const Tile& t);
Tile decode_tile(std::string_view bytes);
inline constexpr std::size_t kTileHeaderBytes = 16;

struct StoreConfig {
  /// Fixed delay added to every get and put.
  std::chrono::microseconds op_latency{0};
  /// Transfer rate cap; 0 means unlimited.
  double bytes_per_second = 0.0;
  /// Reject overwrites with different bytes (single-assignment runs).
  bool enforce_ssa = true;
};

struct StoreStats {
  std::uint64_t puts = 0;
  std::uint64_t gets = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_read = 0;
};

/// Tile-granular object store. Per-key read-after-write is the only
/// consistency promise; every method is safe to call concurrently.
class ObjectStore {
 public:
  explicit ObjectStore(StoreConfig config) : config_(config) {}
  virtual ~ObjectStore() = default;

  /// Throws StoreError on non-finite values and SsaViolation when the key
  /// already holds different bytes.
  void put_tile(const TileKey& key, const Tile& t);
  /// Throws MissingKeyError if absent, StoreError if the stored bytes are corrupt.
  Tile get_tile(const TileKey& key);
  bool tile_exists(const TileKey& key) const { return exists_raw(key); }

  /// Drop every tile of a run. Used by the harness between repetitions.
  virtual void remove_run(std::string_view run_id) = 0;

  const StoreConfig& config() const { return config_; }
  StoreStats stats() const;

 protected:
  enum class Publish { Created, Identical, Conflict };
  /// Store `bytes` at `key` unless present; report what was there.
  virtual Publish publish(const TileKey& key, const std::string& bytes, bool overwrite) = 0;
  virtual std::optional<std::string> fetch(const TileKey& key) const = 0;
  virtual bool exists_raw(const TileKey& key) const = 0;

 private:
  void simulate_transfer(std::size_t bytes) const;

  StoreConfig config_;
  std::atomic<std::uint64_t> puts_{0}, gets_{0}, bytes_written_{0}, bytes_read_{0};
};

class MemoryStore final : public ObjectStore {
 public:
  explicit MemoryStore(StoreConfig config = {}) : ObjectStore(config) {}
  void remove_run(std::string_view run_id) override;

 protected:
  Publish publish(const TileKey& key, const std::string& bytes, bool overwrite) override;
  std::optional<std::string> fetch(const TileKey& key) const override;
  bool exists_raw(const TileKey& key) const override;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::string, std::less<>> objects_;
};

/// One file per tile under `<root>/<run_id>/<matrix>/<i0>_<i1>.tile`,
/// published with an atomic link/rename from a temporary in the same directory.
class FilesystemStore final : public ObjectStore {
 public:
  FilesystemStore(std::filesystem::path root, StoreConfig config = {});
  void remove_run(std::string_view run_id) override;
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path_of(const TileKey& key) const;

 protected:
  Publish publish(const TileKey& key, const std::string& bytes, bool overwrite) override;
  std::optional<std::string> fetch(const TileKey& key) const override;
  bool exists_raw(const TileKey& key) const override;

 private:
  std::filesystem::path root_;
  std::atomic<std::uint64_t> tmp_counter_{0};
};

enum class Backend { Memory, Filesystem };
std::unique_ptr<ObjectStore> make_store(Backend backend, const StoreConfig& config,
                                        const std::filesystem::path& root = {});

}  // namespace lambdapack::store
