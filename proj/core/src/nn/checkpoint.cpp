#include "picknet/nn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <json.hpp>

#include "picknet/error.hpp"

namespace picknet::nn {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'P', 'K', 'N', 'T'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(0L, data, static_cast<uInt>(n)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void get_floats(float* dst, std::size_t n) {
    require(n <= (end_ - pos_) / sizeof(float), ErrorCode::kTruncated, "checkpoint ends inside tensor data");
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  bool done() const { return pos_ >= end_; }

 private:
  void need(std::size_t n) const {
    require(n <= end_ - pos_, ErrorCode::kTruncated, "checkpoint ends unexpectedly");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode(const std::string& header,
                                 const std::vector<NamedTensor<float>>& tensors,
                                 std::uint32_t version) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, version);
  put_string(out, header);
  for (const auto& nt : tensors) {
    require(nt.tensor.consistent(), ErrorCode::kShapeMismatch, "tensor '" + nt.name + "' is inconsistent");
    put_string(out, nt.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.tensor.shape.size()));
    for (auto e : nt.tensor.shape) put<std::uint64_t>(out, e);
    const auto* raw = reinterpret_cast<const std::uint8_t*>(nt.tensor.data.data());
    out.insert(out.end(), raw, raw + nt.tensor.data.size() * sizeof(float));
  }
  put<std::uint32_t>(out, crc_of(out.data(), out.size()));
  return out;
}

struct Decoded {
  std::uint32_t version = 0;
  std::string header;
  std::vector<NamedTensor<float>> tensors;
};

Decoded decode(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= 4, ErrorCode::kTruncated, "checkpoint shorter than its magic");
  require(std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorCode::kMagicMismatch,
          "not a PKNT checkpoint");
  require(bytes.size() >= 12, ErrorCode::kTruncated, "checkpoint header truncated");
  Decoded d;
  std::memcpy(&d.version, bytes.data() + 4, 4);
  require(d.version == kCheckpointVersion, ErrorCode::kUnsupportedVersion,
          "checkpoint version " + std::to_string(d.version) + " is not supported");

  const std::size_t body_end = bytes.size() - 4;
  Reader r(bytes, body_end);
  r.seek(8);
  d.header = r.get_string();
  while (!r.done()) {
    NamedTensor<float> nt;
    nt.name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    require(rank <= 8, ErrorCode::kShapeMismatch, "tensor '" + nt.name + "' has implausible rank");
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto e = r.get<std::uint64_t>();
      require(e <= (std::size_t{1} << 40) && (e == 0 || count <= (std::size_t{1} << 40) / e),
              ErrorCode::kShapeMismatch, "tensor '" + nt.name + "' has implausible extents");
      nt.tensor.shape.push_back(static_cast<std::size_t>(e));
      count *= static_cast<std::size_t>(e);
    }
    nt.tensor.data.resize(0);
    require(count <= (body_end - r.pos()) / sizeof(float), ErrorCode::kTruncated,
            "checkpoint ends inside tensor '" + nt.name + "'");
    nt.tensor.data.resize(count);
    r.get_floats(nt.tensor.data.data(), count);
    d.tensors.push_back(std::move(nt));
  }
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body_end, 4);
  require(stored == crc_of(bytes.data(), body_end), ErrorCode::kChecksumMismatch,
          "checkpoint CRC32 mismatch");
  return d;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace

std::vector<std::uint8_t> serialize(const ModelCheckpoint& ck) {
  validate(ck.config);
  auto header = nlohmann::json::parse(to_json(ck.config));
  const auto extra = nlohmann::json::parse(ck.extra_json.empty() ? "{}" : ck.extra_json);
  if (!extra.empty()) header["extra"] = extra;
  return encode(header.dump(), ck.tensors, ck.format_version);
}

ModelCheckpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  Decoded d = decode(bytes);
  ModelCheckpoint ck;
  ck.format_version = d.version;
  ck.config = model_config_from_json(d.header);
  try {
    const auto header = nlohmann::json::parse(d.header);
    ck.extra_json = header.contains("extra") ? header["extra"].dump() : "{}";
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidConfig, std::string("malformed checkpoint header: ") + e.what());
  }
  ck.tensors = std::move(d.tensors);

  // Every parameter of the described network must appear exactly once.
  const PickNet<float> shape_ref(ck.config);
  std::map<std::string, const Tensor<float>*> expected;
  for (const auto& p : shape_ref.parameters()) expected[p.name] = &p.tensor;
  std::map<std::string, int> seen;
  for (const auto& nt : ck.tensors) {
    auto it = expected.find(nt.name);
    require(it != expected.end(), ErrorCode::kShapeMismatch, "unexpected tensor '" + nt.name + "'");
    require(++seen[nt.name] == 1, ErrorCode::kShapeMismatch, "duplicate tensor '" + nt.name + "'");
    require(nt.tensor.shape == it->second->shape, ErrorCode::kShapeMismatch,
            "tensor '" + nt.name + "' has the wrong shape for the config");
  }
  require(seen.size() == expected.size(), ErrorCode::kShapeMismatch,
          "checkpoint is missing parameters for its config");
  return ck;
}

void save_checkpoint(const ModelCheckpoint& ck, const std::filesystem::path& path) {
  write_file(path, serialize(ck));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

void save_tensors(const std::vector<NamedTensor<float>>& tensors, const std::string& header_json,
                  const std::filesystem::path& path) {
  write_file(path, encode(header_json, tensors, kCheckpointVersion));
}

std::vector<NamedTensor<float>> load_tensors(const std::filesystem::path& path, std::string* header_json) {
  Decoded d = decode(read_file(path));
  if (header_json) *header_json = d.header;
  return std::move(d.tensors);
}

template <typename T>
ModelCheckpoint make_checkpoint(const PickNet<T>& net, std::string extra_json) {
  ModelCheckpoint ck;
  ck.config = net.config();
  ck.extra_json = std::move(extra_json);
  for (const auto& p : net.parameters()) ck.tensors.push_back({p.name, p.tensor.template cast<float>()});
  return ck;
}

template <typename T>
PickNet<T> network_from_checkpoint(const ModelCheckpoint& ck) {
  PickNet<T> net(ck.config);
  auto& params = net.mutable_parameters();
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& nt : ck.tensors) by_name[nt.name] = &nt.tensor;
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    require(it != by_name.end(), ErrorCode::kShapeMismatch, "checkpoint lacks tensor '" + p.name + "'");
    require(it->second->shape == p.tensor.shape, ErrorCode::kShapeMismatch,
            "tensor '" + p.name + "' has the wrong shape");
    p.tensor = it->second->template cast<T>();
  }
  return net;
}

template ModelCheckpoint make_checkpoint<float>(const PickNet<float>&, std::string);
template ModelCheckpoint make_checkpoint<double>(const PickNet<double>&, std::string);
template PickNet<float> network_from_checkpoint<float>(const ModelCheckpoint&);
template PickNet<double> network_from_checkpoint<double>(const ModelCheckpoint&);

}  // namespace picknet::nn
