#include "repsel/matrix_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <span>

#include "repsel/error.hpp"
#include "repsel/hash.hpp"

namespace repsel {

static_assert(std::endian::native == std::endian::little, "cache format assumes little-endian");

namespace {

template <typename T>
void put_raw(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_str(std::string& out, std::string_view s) {
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  bool raw(T& value) {
    if (bytes_.size() - pos_ < sizeof(T)) return false;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return true;
  }

  bool str(std::string& s) {
    std::uint32_t len = 0;
    if (!raw(len) || bytes_.size() - pos_ < len) return false;
    s.assign(bytes_.substr(pos_, len));
    pos_ += len;
    return true;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

std::string encode_matrix(const DistanceMatrix& matrix) {
  const std::size_t n = matrix.size();
  std::string out;
  out.reserve(64 + matrix.dataset_id.size() + matrix.params_fingerprint.size() + n * 48 + n * n * 8);
  out.append(kMatrixMagic);
  put_raw<std::uint32_t>(out, kMatrixFormatVersion);
  put_raw<std::uint64_t>(out, n);
  put_str(out, matrix.dataset_id);
  put_str(out, matrix.params_fingerprint);
  for (const auto& id : matrix.order) put_str(out, id);
  for (double x : matrix.d) put_raw<double>(out, x);
  const auto digest = sha256(as_bytes(out));
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

std::optional<DistanceMatrix> decode_matrix(std::string_view bytes) {
  constexpr std::size_t kDigest = 32;
  if (bytes.size() < kMatrixMagic.size() + kDigest) return std::nullopt;
  const std::string_view body = bytes.substr(0, bytes.size() - kDigest);
  const auto digest = sha256(as_bytes(body));
  if (std::memcmp(digest.data(), bytes.data() + body.size(), kDigest) != 0) return std::nullopt;
  if (!body.starts_with(kMatrixMagic)) return std::nullopt;

  Reader r(body.substr(kMatrixMagic.size()));
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  DistanceMatrix m;
  if (!r.raw(version) || version != kMatrixFormatVersion || !r.raw(n)) return std::nullopt;
  if (!r.str(m.dataset_id) || !r.str(m.params_fingerprint)) return std::nullopt;
  if (n > r.remaining()) return std::nullopt;
  m.order.resize(n);
  for (auto& id : m.order) {
    if (!r.str(id)) return std::nullopt;
  }
  if (r.remaining() != n * n * sizeof(double)) return std::nullopt;
  m.d.resize(n * n);
  for (double& x : m.d) r.raw(x);
  return m;
}

MatrixCache::MatrixCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path MatrixCache::path_for(std::string_view dataset_id,
                                            std::string_view params_fingerprint) const {
  const auto digest = sha256(as_bytes(params_fingerprint));
  // Dataset ids are hex; anything else is hashed to keep the name safe.
  const bool safe_id = !dataset_id.empty() && dataset_id.size() <= 64 &&
                       dataset_id.find_first_not_of("0123456789abcdef") == std::string_view::npos;
  std::string name(dataset_id);
  if (!safe_id) {
    const auto id_digest = sha256(as_bytes(dataset_id));
    name = to_hex(std::span(id_digest).first(16));
  }
  name += "-" + to_hex(std::span(digest).first(8)) + ".dmx";
  return dir_ / name;
}

std::mutex& MatrixCache::key_mutex(const std::filesystem::path& path) const {
  std::lock_guard lock(map_mutex_);
  auto& slot = key_mutexes_[path.string()];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

void MatrixCache::put(const DistanceMatrix& matrix) {
  const auto path = path_for(matrix.dataset_id, matrix.params_fingerprint);
  const std::string bytes = encode_matrix(matrix);

  std::lock_guard lock(key_mutex(path));
  std::random_device rd;
  auto tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "cannot write cache file " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot publish cache file " + path.string());
  }
}

std::optional<DistanceMatrix> MatrixCache::get(std::string_view dataset_id,
                                               std::string_view params_fingerprint) const {
  const auto path = path_for(dataset_id, params_fingerprint);
  std::lock_guard lock(key_mutex(path));
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  auto matrix = decode_matrix(bytes);
  if (!matrix) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
    return std::nullopt;
  }
  // A file name collision must never hand back another key's matrix.
  if (matrix->dataset_id != dataset_id || matrix->params_fingerprint != params_fingerprint) {
    return std::nullopt;
  }
  return matrix;
}

}  // namespace repsel
