#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "narralign/error.hpp"

namespace narralign {

/// Row-major float32 matrix, row i holds the embedding of paragraph i.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::string doc_id, std::size_t dim, std::vector<float> data)
      : doc_id_(std::move(doc_id)), dim_(dim), data_(std::move(data)) {
    if (dim_ == 0) fail(ErrorKind::InvalidArgument, "embedding dim must be positive");
    if (data_.size() % dim_ != 0) fail(ErrorKind::InvalidArgument, "embedding data is not a whole number of rows");
    for (float v : data_)
      if (!std::isfinite(v)) fail(ErrorKind::InvariantViolation, "embedding matrix has a non-finite entry");
    norms_.resize(rows());
    for (std::size_t i = 0; i < rows(); ++i) {
      double s = 0.0;
      for (float v : row(i)) s += static_cast<double>(v) * v;
      norms_[i] = std::sqrt(s);
    }
  }

  const std::string& doc_id() const { return doc_id_; }
  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  double norm(std::size_t i) const { return norms_[i]; }
  bool is_zero_row(std::size_t i) const { return norms_[i] == 0.0; }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const EmbeddingMatrix& o) const {
    return doc_id_ == o.doc_id_ && dim_ == o.dim_ && data_ == o.data_;
  }

 private:
  std::string doc_id_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<double> norms_;
};

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

}  // namespace detail

/// Header line {"doc_id","dim","count","dtype":"f32le"} followed by count*dim little-endian floats.
inline void write_embeddings(std::ostream& os, const EmbeddingMatrix& m) {
  nlohmann::ordered_json header;
  header["doc_id"] = m.doc_id();
  header["dim"] = m.dim();
  header["count"] = m.rows();
  header["dtype"] = "f32le";
  os << header.dump() << '\n';
  for (float v : m.data()) {
    const auto bits = detail::to_little_endian(std::bit_cast<std::uint32_t>(v));
    char buf[4];
    std::memcpy(buf, &bits, 4);
    os.write(buf, 4);
  }
}

inline EmbeddingMatrix read_embeddings(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::EmptyInput, "embedding file has no header");
  nlohmann::json header;
  std::size_t dim = 0, count = 0;
  std::string doc_id;
  try {
    header = nlohmann::json::parse(line);
    doc_id = header.at("doc_id").get<std::string>();
    dim = header.at("dim").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
    if (header.at("dtype").get<std::string>() != "f32le") throw MalformedRecord(1, "dtype must be f32le");
  } catch (const nlohmann::json::exception& e) {
    throw MalformedRecord(1, std::string("bad embedding header: ") + e.what());
  }
  std::vector<float> data(count * dim);
  for (auto& v : data) {
    char buf[4];
    if (!is.read(buf, 4)) fail(ErrorKind::MalformedRecord, "embedding payload is shorter than count*dim floats");
    std::uint32_t bits;
    std::memcpy(&bits, buf, 4);
    v = std::bit_cast<float>(detail::to_little_endian(bits));
  }
  if (is.peek() != std::char_traits<char>::eof())
    fail(ErrorKind::MalformedRecord, "embedding payload is longer than count*dim floats");
  return EmbeddingMatrix(std::move(doc_id), dim, std::move(data));
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingInput, "cannot open embedding file " + path.string());
  return read_embeddings(in);
}

inline void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::MissingInput, "cannot write " + path.string());
  write_embeddings(out, m);
}

}  // namespace narralign
