#include "lambdapack/store/object_store.hpp"

#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

#include "lambdapack/error.hpp"

namespace lambdapack::store {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'L', 'P', 'T', 'I', 'L', 'E', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::string index_suffix(const std::vector<std::int64_t>& idx) {
  std::string s;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) s += '_';
    s += std::to_string(idx[i]);
  }
  return s;
}

}  // namespace

std::string TileKey::to_string() const { return run_id + "/" + matrix + "/" + index_suffix(indices); }

std::string encode_tile(const Tile& t) {
  if (t.rows() == 0 || t.cols() == 0) throw StoreError("tile must have positive shape");
  if (t.rows() > UINT32_MAX || t.cols() > UINT32_MAX) throw StoreError("tile too large to encode");
  std::string out;
  out.reserve(kTileHeaderBytes + t.size() * 8);
  out.append(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(t.rows()));
  put_u32(out, static_cast<std::uint32_t>(t.cols()));
  for (double v : t.values()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  return out;
}

Tile decode_tile(std::string_view bytes) {
  if (bytes.size() < kTileHeaderBytes || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw StoreError("corrupt tile header");
  }
  const std::size_t rows = get_u32(bytes, 8);
  const std::size_t cols = get_u32(bytes, 12);
  if (rows == 0 || cols == 0 || bytes.size() != kTileHeaderBytes + rows * cols * 8) {
    throw StoreError("corrupt tile: header says " + std::to_string(rows) + "x" + std::to_string(cols) + " but payload is " +
                     std::to_string(bytes.size() - kTileHeaderBytes) + " bytes");
  }
  std::vector<double> values(rows * cols);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + kTileHeaderBytes;
  for (std::size_t k = 0; k < values.size(); ++k, p += 8) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    values[k] = std::bit_cast<double>(bits);
  }
  return Tile(rows, cols, std::move(values));
}

void ObjectStore::simulate_transfer(std::size_t bytes) const {
  auto delay = std::chrono::duration<double>(config_.op_latency);
  if (config_.bytes_per_second > 0) delay += std::chrono::duration<double>(bytes / config_.bytes_per_second);
  if (delay.count() > 0) std::this_thread::sleep_for(delay);
}

void ObjectStore::put_tile(const TileKey& key, const Tile& t) {
  if (!t.all_finite()) throw StoreError("refusing to store non-finite values at " + key.to_string());
  std::string bytes = encode_tile(t);
  // The delay happens before publish so concurrent readers see the key only once the put is done.
  simulate_transfer(bytes.size());
  Publish r = publish(key, bytes, !config_.enforce_ssa);
  if (r == Publish::Conflict) {
    throw SsaViolation("tile " + key.to_string() + " rewritten with different contents");
  }
  puts_.fetch_add(1, std::memory_order_relaxed);
  bytes_written_.fetch_add(bytes.size(), std::memory_order_relaxed);
}

Tile ObjectStore::get_tile(const TileKey& key) {
  auto bytes = fetch(key);
  if (!bytes) throw MissingKeyError("missing tile " + key.to_string());
  simulate_transfer(bytes->size());
  gets_.fetch_add(1, std::memory_order_relaxed);
  bytes_read_.fetch_add(bytes->size(), std::memory_order_relaxed);
  return decode_tile(*bytes);
}

StoreStats ObjectStore::stats() const {
  return {puts_.load(), gets_.load(), bytes_written_.load(), bytes_read_.load()};
}

// ---- memory ----

ObjectStore::Publish MemoryStore::publish(const TileKey& key, const std::string& bytes, bool overwrite) {
  std::unique_lock lock(mu_);
  auto [it, inserted] = objects_.try_emplace(key.to_string(), bytes);
  if (inserted) return Publish::Created;
  if (it->second == bytes) return Publish::Identical;
  if (overwrite) {
    it->second = bytes;
    return Publish::Created;
  }
  return Publish::Conflict;
}

std::optional<std::string> MemoryStore::fetch(const TileKey& key) const {
  std::shared_lock lock(mu_);
  auto it = objects_.find(key.to_string());
  if (it == objects_.end()) return std::nullopt;
  return it->second;
}

bool MemoryStore::exists_raw(const TileKey& key) const {
  std::shared_lock lock(mu_);
  return objects_.contains(key.to_string());
}

void MemoryStore::remove_run(std::string_view run_id) {
  std::unique_lock lock(mu_);
  const std::string prefix = std::string(run_id) + "/";
  for (auto it = objects_.lower_bound(prefix); it != objects_.end() && it->first.starts_with(prefix);) {
    it = objects_.erase(it);
  }
}

// ---- filesystem ----

FilesystemStore::FilesystemStore(fs::path root, StoreConfig config) : ObjectStore(config), root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw StoreError("cannot create store root " + root_.string() + ": " + ec.message());
}

fs::path FilesystemStore::path_of(const TileKey& key) const {
  return root_ / key.run_id / key.matrix / (index_suffix(key.indices) + ".tile");
}

namespace {

std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

ObjectStore::Publish FilesystemStore::publish(const TileKey& key, const std::string& bytes, bool overwrite) {
  const fs::path target = path_of(key);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw StoreError("cannot create " + target.parent_path().string() + ": " + ec.message());

  const fs::path tmp = target.parent_path() /
                       ("." + target.filename().string() + "." + std::to_string(::getpid()) + "." +
                        std::to_string(tmp_counter_.fetch_add(1)) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw StoreError("write failed for " + tmp.string());
  }
  if (overwrite) {
    fs::rename(tmp, target, ec);
    if (ec) throw StoreError("rename failed for " + target.string() + ": " + ec.message());
    return Publish::Created;
  }
  // link() publishes atomically and, unlike rename, refuses to replace an
  // existing key, which is what single assignment needs.
  const int rc = ::link(tmp.c_str(), target.c_str());
  const int err = errno;
  fs::remove(tmp, ec);
  if (rc == 0) return Publish::Created;
  if (err != EEXIST) throw StoreError("publish failed for " + target.string() + ": " + std::strerror(err));
  auto existing = read_file(target);
  return existing && *existing == bytes ? Publish::Identical : Publish::Conflict;
}

std::optional<std::string> FilesystemStore::fetch(const TileKey& key) const { return read_file(path_of(key)); }

bool FilesystemStore::exists_raw(const TileKey& key) const {
  std::error_code ec;
  return fs::exists(path_of(key), ec);
}

void FilesystemStore::remove_run(std::string_view run_id) {
  std::error_code ec;
  fs::remove_all(root_ / std::string(run_id), ec);
}

std::unique_ptr<ObjectStore> make_store(Backend backend, const StoreConfig& config, const fs::path& root) {
  if (backend == Backend::Filesystem) {
    if (root.empty()) throw StoreError("filesystem backend needs a root directory");
    return std::make_unique<FilesystemStore>(root, config);
  }
  return std::make_unique<MemoryStore>(config);
}

}  // namespace lambdapack::store
