#include "lcft/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace lcft {

namespace {

constexpr std::array<char, 8> kMagic{'L', 'C', 'F', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFlagUserFeature = 1;
constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 32;

template <typename UInt>
void put(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t k = 0; k < sizeof(UInt); ++k) {
    bytes[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

template <typename UInt>
UInt get(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("checkpoint: truncated file");
  UInt v = 0;
  for (std::size_t k = 0; k < sizeof(UInt); ++k) v |= static_cast<UInt>(bytes[k]) << (8 * k);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get<std::uint64_t>(in)); }

std::uint32_t kind_tag(ModelKind kind) {
  switch (kind) {
    case ModelKind::LR:
      return 0;
    case ModelKind::WideDeepLite:
      return 1;
    case ModelKind::DinLite:
      return 2;
  }
  return 0;
}

ModelKind kind_from_tag(std::uint32_t tag) {
  switch (tag) {
    case 0:
      return ModelKind::LR;
    case 1:
      return ModelKind::WideDeepLite;
    case 2:
      return ModelKind::DinLite;
    default:
      throw DataError("checkpoint: unknown model kind tag " + std::to_string(tag));
  }
}

Index get_dim(std::istream& in) {
  const auto v = get<std::uint64_t>(in);
  if (v >= kMaxDim) throw DataError("checkpoint: dimension too large");
  return static_cast<Index>(v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& model) {
  const ModelConfig& c = model.config;
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, kind_tag(c.kind));
  put<std::uint32_t>(out, c.use_user_feature ? kFlagUserFeature : 0u);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(c.vocab.num_users));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(c.vocab.num_items));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(c.vocab.num_categories));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(c.embed_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.hidden.size()));
  for (Index h : c.hidden) put<std::uint64_t>(out, static_cast<std::uint64_t>(h));
  const auto& arrays = model.params.arrays();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, m] : arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Index k = 0; k < m.size(); ++k) put_f64(out, m.data()[k]);
  }
}

void write_checkpoint(const std::filesystem::path& path, const ModelParams& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  write_checkpoint(out, model);
  if (!out) throw ConfigError("checkpoint write failed: " + path.string());
}

ModelParams read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelConfig c;
  c.kind = kind_from_tag(get<std::uint32_t>(in));
  const auto flags = get<std::uint32_t>(in);
  if ((flags & ~kFlagUserFeature) != 0) throw DataError("checkpoint: unknown feature flags");
  c.use_user_feature = (flags & kFlagUserFeature) != 0;
  c.vocab.num_users = get_dim(in);
  c.vocab.num_items = get_dim(in);
  c.vocab.num_categories = get_dim(in);
  c.embed_dim = get_dim(in);
  const auto layers = get<std::uint32_t>(in);
  if (layers > 64) throw DataError("checkpoint: too many hidden layers");
  c.hidden.clear();
  for (std::uint32_t k = 0; k < layers; ++k) c.hidden.push_back(get_dim(in));

  // The header must describe a valid model; its layout is the reference the
  // stored arrays are checked against.
  const ModelParams reference = init_model(c, 0);

  ModelParams model;
  model.config = c;
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t a = 0; a < count; ++a) {
    const auto len = get<std::uint32_t>(in);
    if (len > 4096) throw DataError("checkpoint: array name too long");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw DataError("checkpoint: truncated file");
    const auto ndim = get<std::uint32_t>(in);
    if (ndim != 2) throw DataError("checkpoint: array " + name + " is not 2-D");
    const Index rows = get_dim(in);
    const Index cols = get_dim(in);
    if (!reference.params.contains(name)) {
      throw DataError("checkpoint: unexpected array " + name);
    }
    const Matrix& ref = reference.params.at(name);
    if (ref.rows() != rows || ref.cols() != cols) {
      throw DataError("checkpoint: array " + name + " has the wrong shape");
    }
    Matrix m(rows, cols);
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = get_f64(in);
    if (!m.allFinite()) throw DataError("checkpoint: array " + name + " is not finite");
    model.params.add(std::move(name), std::move(m));
  }
  if (model.params.arrays().size() != reference.params.arrays().size()) {
    throw DataError("checkpoint: missing arrays");
  }
  return model;
}

ModelParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace lcft
