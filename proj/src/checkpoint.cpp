#include "mctm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mctm/error.hpp"

namespace mctm {
namespace {

constexpr char kMagic[8] = {'M', 'C', 'T', 'M', 'C', 'K', 'P', 'T'};

static_assert(sizeof(double) == 8);

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const Vocabulary& vocabulary) {
  const int K = params.num_topics();
  const int W = params.num_words();
  if (static_cast<std::size_t>(W) != vocabulary.size()) {
    throw ValidationError("vocabulary size does not match beta");
  }
  const nlohmann::json header{{"format", "mctm-checkpoint"},
                              {"version", kCheckpointVersion},
                              {"K", K},
                              {"W", W},
                              {"vocab_hash", vocabulary.hash()},
                              {"vocabulary", vocabulary.terms()},
                              {"layout", {"mu", "sigma", "beta"}}};
  const std::string text = header.dump();

  // Write to a sibling file and rename so a crash never leaves a torn checkpoint.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (int k = 0; k < K; ++k) put_f64(out, params.mu()[k]);
    for (int i = 0; i < K; ++i) {
      for (int j = 0; j < K; ++j) put_f64(out, params.sigma()(i, j));
    }
    for (int w = 0; w < W; ++w) {
      for (int k = 0; k < K; ++k) put_f64(out, params.beta()(w, k));
    }
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError(path.string() + " is not an mctm checkpoint");
  }
  const auto len = get_u32(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw IoError("truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (header.value("format", "") != "mctm-checkpoint") throw IoError("unknown checkpoint format");
  if (header.value("version", 0) != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + header.value("version", nlohmann::json()).dump());
  }
  const int K = header.at("K").get<int>();
  const int W = header.at("W").get<int>();
  if (K < 1 || W < 1) throw IoError("checkpoint has invalid dimensions");

  Vector mu(K);
  for (int k = 0; k < K; ++k) mu[k] = get_f64(in);
  Matrix sigma(K, K);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) sigma(i, j) = get_f64(in);
  }
  RowMatrix beta(W, K);
  for (int w = 0; w < W; ++w) {
    for (int k = 0; k < K; ++k) beta(w, k) = get_f64(in);
  }

  Vocabulary vocab(header.at("vocabulary").get<std::vector<std::string>>());
  if (vocab.size() != static_cast<std::size_t>(W)) throw IoError("checkpoint vocabulary size mismatch");
  auto hash = header.at("vocab_hash").get<std::string>();
  if (hash != vocab.hash()) throw IoError("checkpoint vocabulary hash mismatch");
  return Checkpoint{ModelParams(std::move(mu), std::move(sigma), std::move(beta)), std::move(vocab),
                    std::move(hash)};
}

}  // namespace mctm
