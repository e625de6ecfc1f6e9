#include "bes/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bes/error.hpp"

namespace bes {

namespace {

void write_le_f64(std::ofstream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

Matrix read_le_f64(const std::filesystem::path& file, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::DatasetMissing, "missing blob " + file.string());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error(ErrorCode::ParseError, "truncated blob " + file.string());
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    m.data()[i] = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::ParseError, "oversized blob " + file.string());
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ad::ParameterSet& params, const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "be-spectral-checkpoint/1";
  manifest["dtype"] = "f64le";
  manifest["order"] = "column-major";
  manifest["meta"] = extra;
  manifest["params"] = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const std::string file = "param_" + std::to_string(i) + ".bin";
    std::ofstream out(dir / file, std::ios::binary);
    write_le_f64(out, p.value);
    manifest["params"].push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"file", file}});
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorCode::DatasetMissing, "no manifest.json in " + dir.string());
  Checkpoint ck;
  try {
    const nlohmann::json manifest = nlohmann::json::parse(in);
    if (manifest.at("dtype") != "f64le") throw Error(ErrorCode::ParseError, "unsupported dtype");
    ck.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& entry : manifest.at("params")) {
      const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
      const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
      ck.params.add(entry.at("name").get<std::string>(),
                    read_le_f64(dir / entry.at("file").get<std::string>(), rows, cols));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint manifest: ") + e.what());
  }
  return ck;
}

}  // namespace bes
