#include "lcft/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "lcft/errors.hpp"

namespace lcft {

std::string git_blob_hash(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int size = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &size) != 1) {
    throw Error("SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * size);
  for (unsigned k = 0; k < size; ++k) {
    const unsigned char b = digest[k];
    out += kHex[b >> 4];
    out += kHex[b & 0xf];
  }
  return out;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string git_blob_hash_file(const std::filesystem::path& path) {
  return git_blob_hash(slurp(path));
}

void Manifest::add_file(const std::filesystem::path& dir, const std::string& relative) {
  files[relative] = git_blob_hash_file(dir / relative);
}

std::string Manifest::text() const {
  std::ostringstream out;
  out << "lcft-manifest 1\n"
      << "seed " << seed << '\n'
      << "config " << config_hash << '\n';
  for (const auto& [path, hash] : files) out << "file " << hash << ' ' << path << '\n';
  return out.str();
}

Manifest Manifest::parse(std::string_view text) {
  Manifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (line_no == 1) {
      std::string version;
      fields >> version;
      if (tag != "lcft-manifest" || version != "1") throw ParseError("not a manifest", line_no);
      continue;
    }
    if (tag == "seed") {
      std::string v;
      fields >> v;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), m.seed);
      if (ec != std::errc() || ptr != v.data() + v.size()) throw ParseError("bad seed", line_no);
    } else if (tag == "config") {
      fields >> m.config_hash;
    } else if (tag == "file") {
      std::string hash;
      fields >> hash;
      std::string path;
      std::getline(fields >> std::ws, path);
      if (hash.size() != 40 || path.empty()) throw ParseError("bad file entry", line_no);
      m.files[path] = hash;
    } else {
      throw ParseError("unknown manifest entry '" + tag + "'", line_no);
    }
  }
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return parse(slurp(path));
}

void Manifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text();
  if (!out) throw ConfigError("write failed: " + path.string());
}

}  // namespace lcft
