#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "qparisi/quantum.hpp"

namespace qparisi {

namespace {

constexpr char kMagic[4] = {'Q', 'P', 'O', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("operator dump: truncated file");
  return v;
}

}  // namespace

void write_operator_dump(const std::string& path, const Eigen::MatrixXcd& op) {
  if (op.rows() != op.cols()) throw std::invalid_argument("write_operator_dump: operator must be square");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_operator_dump: cannot open " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(op.rows()));
  for (Eigen::Index r = 0; r < op.rows(); ++r) {
    for (Eigen::Index c = 0; c < op.cols(); ++c) {
      put<double>(out, op(r, c).real());
      put<double>(out, op(r, c).imag());
    }
  }
}

Eigen::MatrixXcd read_operator_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_operator_dump: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("read_operator_dump: bad magic");
  if (get<std::uint32_t>(in) != kVersion) throw std::runtime_error("read_operator_dump: unsupported version");
  const auto dim = static_cast<Eigen::Index>(get<std::uint64_t>(in));
  Eigen::MatrixXcd op(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      const double re = get<double>(in);
      const double im = get<double>(in);
      op(r, c) = {re, im};
    }
  }
  return op;
}

}  // namespace qparisi
