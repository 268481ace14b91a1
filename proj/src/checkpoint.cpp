#include <cstring>
#include <fstream>

#include "ser/error.hpp"
#include "ser/model.hpp"

namespace ser {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'R', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string origin) : buf_(std::move(bytes)), origin_(std::move(origin)) {}

  const unsigned char* take(std::size_t n) {
    if (pos_ + n > buf_.size()) throw Error(ErrorCode::kParse, origin_ + ": truncated checkpoint");
    const auto* p = reinterpret_cast<const unsigned char*>(buf_.data()) + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() {
    const auto* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  double f64() {
    const auto* p = take(8);
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
  std::string str() {
    const std::uint32_t n = u32();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::string buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ModelParams& params, const LabelSet& labels,
                     const std::filesystem::path& path) {
  validate(params);
  if (labels.size() != params.out_fc.out()) {
    throw Error(ErrorCode::kShapeMismatch, "label set size differs from classifier width");
  }
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(labels.size()));
  for (const auto& l : labels.labels()) {
    w.str(l.name);
    w.u8(l.is_neutral ? 1 : 0);
  }
  auto views = tensors(const_cast<ModelParams&>(params));
  w.u32(static_cast<std::uint32_t>(views.size()));
  for (const auto& t : views) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.rows));
    w.u32(static_cast<std::uint32_t>(t.cols));
  }
  for (const auto& t : views) {
    for (double v : t.values) w.f64(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()))) {
    throw Error(ErrorCode::kUnwritablePath, "cannot write checkpoint " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open checkpoint " + path.string());
  Reader r(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()),
           path.string());
  if (std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::kParse, path.string() + ": not a model checkpoint");
  }
  if (const auto v = r.u32(); v != kVersion) {
    throw Error(ErrorCode::kParse, path.string() + ": unsupported checkpoint version " +
                                       std::to_string(v));
  }
  const std::uint32_t n_labels = r.u32();
  std::vector<std::string> names;
  std::string neutral;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    names.push_back(r.str());
    if (r.u8() != 0) neutral = names.back();
  }
  Checkpoint ck;
  ck.labels = LabelSet(names, neutral);

  const std::uint32_t n_tensors = r.u32();
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> shapes;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    std::size_t rows = r.u32();
    std::size_t cols = r.u32();
    shapes.emplace_back(std::move(name), rows, cols);
  }
  if (shapes.size() != 10) throw Error(ErrorCode::kParse, path.string() + ": bad tensor table");

  ModelConfig c;
  c.hidden_dim = std::get<1>(shapes[0]);
  c.input_dim = std::get<2>(shapes[0]);
  c.encoder_dim = std::get<1>(shapes[2]);
  c.heads = std::get<1>(shapes[4]);
  c.embedding_dim = std::get<1>(shapes[6]);
  c.num_classes = std::get<1>(shapes[8]);
  ck.params = init_params(c, 0);
  auto views = tensors(ck.params);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& [name, rows, cols] = shapes[i];
    if (name != views[i].name || rows != views[i].rows || cols != views[i].cols) {
      throw Error(ErrorCode::kParse, path.string() + ": tensor '" + name +
                                         "' does not match the expected layout");
    }
  }
  for (auto& t : views) {
    for (double& v : t.values) v = r.f64();
  }
  if (!r.done()) throw Error(ErrorCode::kParse, path.string() + ": trailing bytes");
  validate(ck.params);
  return ck;
}

}  // namespace ser
