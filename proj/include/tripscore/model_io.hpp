#pragma once

// Binary model file, version 1. All integers little-endian.
//
//   "PVEC"  u16 version
//   config: u8 mode, u32 dim, u32 window, u32 negative, u32 epochs,
//           u32 min_count, u64 seed, f64 initial_lr, f64 final_lr,
//           u32 workers, u8 train_words, f64 noise_exponent
//   vocab:  u64 V, V x (u32 len, bytes, u64 count)
//   docs:   u64 D, D x (u32 len, bytes)
//   3 matrices (doc, word_in, word_out): u64 rows, u64 cols, rows*cols f32
//   u32 CRC-32 of every preceding byte

#include <bit>
#include <boost/crc.hpp>

#include "embedding.hpp"

namespace tripscore {

inline constexpr std::uint16_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[4] = {'P', 'V', 'E', 'C'};

class ModelFormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

class VersionMismatchError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

class TruncatedModelError : public ModelFormatError {
 public:
  TruncatedModelError(std::string_view section, std::size_t expected, std::size_t actual)
      : ModelFormatError("truncated model file: " + std::string(section) + " needs " + std::to_string(expected) +
                         " bytes, only " + std::to_string(actual) + " available"),
        expected_(expected),
        actual_(actual) {}
  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

class ChecksumError : public ModelFormatError {
 public:
  using ModelFormatError::ModelFormatError;
};

inline std::uint32_t crc32(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

namespace detail {

class ByteWriter {
 public:
  template <class U>
  void put(U v) {
    static_assert(std::is_unsigned_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void put_matrix(const Matrix<float>& m) {
    put(static_cast<std::uint64_t>(m.rows()));
    put(static_cast<std::uint64_t>(m.cols()));
    buf_.reserve(buf_.size() + m.values().size() * 4);
    for (float v : m.values()) put_f32(v);
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  void need(std::size_t n, std::string_view section) const {
    if (remaining() < n) throw TruncatedModelError(section, n, remaining());
  }

  template <class U>
  U get(std::string_view section) {
    need(sizeof(U), section);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  float get_f32(std::string_view s) { return std::bit_cast<float>(get<std::uint32_t>(s)); }
  double get_f64(std::string_view s) { return std::bit_cast<double>(get<std::uint64_t>(s)); }

  std::string get_string(std::string_view section) {
    const auto n = get<std::uint32_t>(section);
    need(n, section);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  Matrix<float> get_matrix(std::string_view section) {
    const auto rows = get<std::uint64_t>(section);
    const auto cols = get<std::uint64_t>(section);
    if (cols != 0 && rows > remaining() / 4 / cols) throw TruncatedModelError(section, rows * cols * 4, remaining());
    need(rows * cols * 4, section);
    Matrix<float> m(rows, cols);
    for (auto& v : m.values()) v = get_f32(section);
    return m;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const EmbeddingModel& model) {
  detail::ByteWriter w;
  w.bytes().append(kModelMagic, 4);
  w.put(kModelFormatVersion);

  const auto& c = model.config;
  w.put(static_cast<std::uint8_t>(c.mode));
  w.put(c.dim);
  w.put(c.window);
  w.put(c.negative);
  w.put(c.epochs);
  w.put(c.min_count);
  w.put(c.seed);
  w.put_f64(c.initial_lr);
  w.put_f64(c.final_lr);
  w.put(c.workers);
  w.put(static_cast<std::uint8_t>(c.train_words ? 1 : 0));
  w.put_f64(c.noise_exponent);

  w.put(static_cast<std::uint64_t>(model.vocab.size()));
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    w.put_string(model.vocab.words[i]);
    w.put(model.vocab.counts[i]);
  }
  w.put(static_cast<std::uint64_t>(model.doc_labels.size()));
  for (const auto& label : model.doc_labels) w.put_string(label);

  w.put_matrix(model.params.doc);
  w.put_matrix(model.params.word_in);
  w.put_matrix(model.params.word_out);

  w.put(crc32(w.bytes()));
  return std::move(w.bytes());
}

inline EmbeddingModel deserialize_model(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kModelMagic, 4))
    throw BadMagicError("not a model file (bad magic bytes)");
  if (bytes.size() < 4 + 2 + 4) throw TruncatedModelError("header", 10, bytes.size());

  detail::ByteReader r(bytes.substr(4, bytes.size() - 8));
  const auto version = r.get<std::uint16_t>("header");
  if (version != kModelFormatVersion)
    throw VersionMismatchError("model format version " + std::to_string(version) + " (expected " +
                               std::to_string(kModelFormatVersion) + ")");

  EmbeddingModel m;
  auto& c = m.config;
  const auto mode = r.get<std::uint8_t>("config");
  if (mode > 2) throw ModelFormatError("unknown training mode " + std::to_string(mode));
  c.mode = static_cast<TrainMode>(mode);
  c.dim = r.get<std::uint32_t>("config");
  c.window = r.get<std::uint32_t>("config");
  c.negative = r.get<std::uint32_t>("config");
  c.epochs = r.get<std::uint32_t>("config");
  c.min_count = r.get<std::uint32_t>("config");
  c.seed = r.get<std::uint64_t>("config");
  c.initial_lr = r.get_f64("config");
  c.final_lr = r.get_f64("config");
  c.workers = r.get<std::uint32_t>("config");
  c.train_words = r.get<std::uint8_t>("config") != 0;
  c.noise_exponent = r.get_f64("config");

  const auto vocab_size = r.get<std::uint64_t>("vocabulary");
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  for (std::uint64_t i = 0; i < vocab_size; ++i) {
    words.push_back(r.get_string("vocabulary"));
    counts.push_back(r.get<std::uint64_t>("vocabulary"));
  }
  m.vocab = Vocabulary::from_counts(std::move(words), std::move(counts), c.min_count, c.noise_exponent);

  const auto doc_count = r.get<std::uint64_t>("documents");
  for (std::uint64_t i = 0; i < doc_count; ++i) m.doc_labels.push_back(r.get_string("documents"));

  m.params.doc = r.get_matrix("doc_vectors");
  m.params.word_in = r.get_matrix("word_in_vectors");
  m.params.word_out = r.get_matrix("word_out_vectors");
  if (r.remaining() != 0) throw ModelFormatError("trailing bytes before checksum");

  const auto payload = bytes.substr(0, bytes.size() - 4);
  detail::ByteReader tail(bytes.substr(bytes.size() - 4));
  const auto stored = tail.get<std::uint32_t>("checksum");
  if (stored != crc32(payload)) throw ChecksumError("model file checksum mismatch");

  if (m.params.doc.rows() != m.doc_labels.size() || m.params.doc.cols() != c.dim ||
      m.params.word_out.rows() != m.vocab.size() || m.params.word_out.cols() != c.hidden_width() ||
      (!m.params.word_in.empty() && (m.params.word_in.rows() != m.vocab.size() || m.params.word_in.cols() != c.dim)))
    throw ModelFormatError("matrix shapes do not match the model configuration");
  m.rebuild_doc_index();
  return m;
}

// Writes via a temporary file so a failed save never leaves a partial model.
inline void save_model(const EmbeddingModel& model, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".partial";
  try {
    write_file(tmp, serialize_model(model));
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

inline EmbeddingModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(path, "no such model file");
  return deserialize_model(read_file(path));
}

}  // namespace tripscore
