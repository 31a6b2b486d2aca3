#pragma once

#include "tabkde/error.hpp"
#include "tabkde/model.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

// Model file layout: a short text header, terminated by an empty line, then a
// little-endian binary payload.
//
//   TABKDE-MODEL
//   version: 1
//   payload-bytes: <decimal>
//   checksum-fnv1a64: <16 hex digits over the payload>
//   rows: <latent rows>   dims: <d>   coreset: <m or none>   (one per line)
//   <empty line>
//   <payload>

namespace tabkde {

inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace io {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

class Writer {
 public:
  void u8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    buffer_.append(s);
  }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  void u64s(const std::vector<std::size_t>& v) {
    u64(v.size());
    for (auto x : v) u64(x);
  }
  template <class Derived>
  void matrix(const Eigen::DenseBase<Derived>& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
  }
  const std::string& bytes() const noexcept { return buffer_; }

 private:
  void raw(const void* p, std::size_t n) { buffer_.append(static_cast<const char*>(p), n); }
  std::string buffer_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint64_t u64() { return load<std::uint64_t>(); }
  double f64() { return load<double>(); }
  std::string str() {
    const auto n = count(1);
    return std::string(take(n));
  }
  std::vector<double> f64s() {
    const auto n = count(sizeof(double));
    std::vector<double> v(n);
    if (n) std::memcpy(v.data(), take(n * sizeof(double)).data(), n * sizeof(double));
    return v;
  }
  std::vector<std::size_t> u64s() {
    const auto n = count(sizeof(std::uint64_t));
    std::vector<std::size_t> v(n);
    for (auto& x : v) x = u64();
    return v;
  }
  template <class M>
  M matrix() {
    const auto rows = u64();
    const auto cols = u64();
    if (cols != 0 && rows > remaining() / (cols * sizeof(double))) fail("matrix larger than payload");
    M m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    }
    return m;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  [[noreturn]] static void fail(const std::string& what) { throw Error(ErrorKind::ModelFormat, "model payload: " + what); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::size_t count(std::size_t element) {
    const auto n = u64();
    if (n > remaining() / element) fail("length field exceeds payload");
    return static_cast<std::size_t>(n);
  }
  std::string_view take(std::size_t n) {
    if (n > remaining()) fail("truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <class T>
  T load() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace io

inline std::string serialize_payload(const TabKdeModel& model) {
  io::Writer w;
  const auto& cfg = model.config;
  w.u64(cfg.seed);
  w.u8(static_cast<std::uint8_t>(cfg.policy));
  w.u64(cfg.dcr_repetitions);
  w.u64(cfg.max_components);
  w.u8(static_cast<std::uint8_t>(cfg.categorical));
  w.u8(static_cast<std::uint8_t>(cfg.rounding));

  const auto& schema = model.schema();
  w.u64(schema.size());
  for (const auto& c : schema.columns()) {
    w.str(c.name());
    w.u8(static_cast<std::uint8_t>(c.kind()));
    w.u64(c.levels().size());
    for (const auto& l : c.levels()) w.str(l);
  }

  w.u8(static_cast<std::uint8_t>(model.encoder.categorical_encoding()));
  const Vector& dir = model.encoder.principal_direction();
  w.f64s(std::vector<double>(dir.data(), dir.data() + dir.size()));
  for (const auto& codec : model.encoder.columns()) {
    w.u8(static_cast<std::uint8_t>(codec.kind));
    w.f64(codec.mean);
    w.f64(codec.stddev);
    w.f64s(codec.codes);
    w.u64s(codec.counts);
  }

  w.u64(model.copula.rows());
  for (const auto& steps : model.copula.columns()) {
    w.f64s(steps.values);
    w.f64s(steps.ecdf);
  }

  w.matrix(model.covariance.sigma);
  w.matrix(model.covariance.cholesky);
  w.f64(model.covariance.ridge);

  w.u64(model.radius.k());
  for (const auto& c : model.radius.components) {
    w.f64(c.weight);
    w.f64(c.mean);
    w.f64(c.variance);
  }

  w.matrix(model.latent);
  w.u8(model.coreset ? 1 : 0);
  if (model.coreset) {
    w.matrix(model.coreset->points);
    w.f64s(model.coreset->weights);
    w.f64(model.coreset->bandwidth);
  }
  return w.bytes();
}

inline TabKdeModel deserialize_payload(std::string_view payload) {
  io::Reader r(payload);
  TabKdeModel model;
  auto enum_u8 = [&](std::uint8_t max) {
    const auto v = r.u8();
    if (v > max) throw Error(ErrorKind::ModelFormat, "model payload: enum value out of range");
    return v;
  };
  auto& cfg = model.config;
  cfg.seed = r.u64();
  cfg.policy = static_cast<BoundaryPolicy>(enum_u8(3));
  cfg.dcr_repetitions = r.u64();
  cfg.max_components = r.u64();
  cfg.categorical = static_cast<CategoricalEncoding>(enum_u8(2));
  cfg.rounding = static_cast<DiscreteRounding>(enum_u8(1));

  const auto d = r.u64();
  std::vector<Column> columns;
  for (std::uint64_t j = 0; j < d; ++j) {
    std::string name = r.str();
    const auto kind = static_cast<Kind>(enum_u8(2));
    const auto nlevels = r.u64();
    std::vector<std::string> levels;
    for (std::uint64_t l = 0; l < nlevels; ++l) levels.push_back(r.str());
    columns.emplace_back(std::move(name), kind, std::move(levels));
  }
  TableSchema schema(std::move(columns));

  const auto categorical = static_cast<CategoricalEncoding>(enum_u8(2));
  const auto dir = r.f64s();
  Vector direction = Eigen::Map<const Vector>(dir.data(), static_cast<Eigen::Index>(dir.size()));
  std::vector<Encoder::ColumnCodec> codecs(d);
  for (auto& codec : codecs) {
    codec.kind = static_cast<Kind>(enum_u8(2));
    codec.mean = r.f64();
    codec.stddev = r.f64();
    codec.codes = r.f64s();
    codec.counts = r.u64s();
  }
  model.encoder = Encoder(schema, std::move(codecs), std::move(direction), categorical);

  const auto copula_rows = r.u64();
  std::vector<CopulaModel::ColumnSteps> steps(d);
  for (auto& s : steps) {
    s.values = r.f64s();
    s.ecdf = r.f64s();
  }
  model.copula = CopulaModel(copula_rows, std::move(steps));

  model.covariance.sigma = r.matrix<Eigen::MatrixXd>();
  model.covariance.cholesky = r.matrix<Eigen::MatrixXd>();
  model.covariance.ridge = r.f64();

  const auto k = r.u64();
  for (std::uint64_t c = 0; c < k; ++c) {
    DcrMixture::Component comp{};
    comp.weight = r.f64();
    comp.mean = r.f64();
    comp.variance = r.f64();
    model.radius.components.push_back(comp);
  }
  model.radius.validate();

  model.latent = r.matrix<Matrix>();
  if (r.u8()) {
    CoresetModel coreset;
    coreset.points = r.matrix<Matrix>();
    coreset.weights = r.f64s();
    coreset.bandwidth = r.f64();
    coreset.validate();
    model.coreset = std::move(coreset);
  }
  if (!r.done()) throw Error(ErrorKind::ModelFormat, "model payload: trailing bytes");

  const auto dims = static_cast<Eigen::Index>(d);
  const bool shapes_ok = model.covariance.sigma.rows() == dims && model.covariance.sigma.cols() == dims &&
                         model.covariance.cholesky.rows() == dims && model.covariance.cholesky.cols() == dims &&
                         (model.latent.rows() == 0 || model.latent.cols() == dims) &&
                         (!model.coreset || model.coreset->points.cols() == dims);
  if (!shapes_ok) throw Error(ErrorKind::ModelFormat, "model payload: component dimensions disagree");
  return model;
}

inline std::string serialize_model(const TabKdeModel& model) {
  const std::string payload = serialize_payload(model);
  std::ostringstream header;
  header << "TABKDE-MODEL\n"
         << "version: " << kModelFormatVersion << '\n'
         << "payload-bytes: " << payload.size() << '\n'
         << "checksum-fnv1a64: " << std::hex << std::setw(16) << std::setfill('0') << io::fnv1a64(payload)
         << std::dec << '\n'
         << "rows: " << model.latent.rows() << '\n'
         << "dims: " << model.dims() << '\n'
         << "coreset: " << (model.coreset ? std::to_string(model.coreset->size()) : std::string("none")) << '\n'
         << '\n';
  return header.str() + payload;
}

inline TabKdeModel deserialize_model(std::string_view bytes) {
  auto fail = [](const std::string& what) -> TabKdeModel { throw Error(ErrorKind::ModelFormat, what); };
  const auto end = bytes.find("\n\n");
  if (bytes.substr(0, 13) != "TABKDE-MODEL\n" || end == std::string_view::npos) return fail("not a TabKDE model file");
  std::istringstream header{std::string(bytes.substr(13, end - 13 + 1))};
  std::string line;
  std::uint64_t version = 0, payload_bytes = 0, checksum = 0;
  bool have_size = false, have_sum = false;
  while (std::getline(header, line)) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) return fail("malformed header line '" + line + "'");
    const std::string key = line.substr(0, colon);
    const std::string value = line.substr(colon + 2);
    try {
      if (key == "version") version = std::stoull(value);
      else if (key == "payload-bytes") payload_bytes = std::stoull(value), have_size = true;
      else if (key == "checksum-fnv1a64") checksum = std::stoull(value, nullptr, 16), have_sum = true;
    } catch (const std::exception&) {
      return fail("malformed header value for '" + key + "'");
    }
  }
  if (version != kModelFormatVersion) return fail("unsupported model format version " + std::to_string(version));
  if (!have_size || !have_sum) return fail("model header lacks payload size or checksum");
  const auto payload = bytes.substr(end + 2);
  if (payload.size() != payload_bytes) return fail("payload size does not match header");
  if (io::fnv1a64(payload) != checksum) return fail("payload checksum mismatch");
  return deserialize_payload(payload);
}

inline void save_model(const std::string& path, const TabKdeModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  const std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

inline TabKdeModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace tabkde
