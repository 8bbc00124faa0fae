#include "mfpu/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "mfpu/errors.hpp"

namespace mfpu {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'P', 'U'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size())
      throw FormatError("truncated checkpoint while reading " + std::string(what) + ": expected " +
                        std::to_string(std::max(expected_, pos_ + n)) + " bytes, got " + std::to_string(bytes_.size()));
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string text(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  void set_expected_size(std::size_t n) { expected_ = n; }
  std::size_t size() const { return bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
  std::size_t expected_ = 0;
};

struct Header {
  std::string tag;
  ModelConfig config;
};

Header read_header(Reader& r, const std::vector<std::uint8_t>& bytes) {
  r.need(4, "magic");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) throw FormatError("bad checkpoint magic (expected \"MFPU\")");
  r.u32("magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  Header h;
  h.tag = r.text("architecture tag");
  try {
    h.config.architecture = parse_architecture(h.tag);
  } catch (const ContractViolation&) {
    throw FormatError("checkpoint has unknown architecture tag '" + h.tag + "'");
  }
  h.config.input_size = r.u32("N");
  h.config.base_width = r.u32("B");
  h.config.dilation = r.u32("d");
  try {
    h.config.validate();
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("checkpoint header is invalid: ") + e.what());
  }
  return h;
}

void read_parameters(Reader& r, Model<float>& model) {
  const auto& params = model.parameters();
  const std::uint32_t count = r.u32("parameter count");
  if (count != params.size())
    throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, model has " + std::to_string(params.size()));
  std::size_t expected = r.position();
  for (const auto& p : params) expected += 8 + p.name.size() + 4 * p.tensor.rank() + 4 * p.tensor.numel();
  r.set_expected_size(expected);
  for (const auto& p : params) {
    const std::string name = r.text("parameter name");
    if (name != p.name) throw FormatError("checkpoint parameter '" + name + "' where '" + p.name + "' was expected");
    const std::uint32_t rank = r.u32("rank");
    Shape shape(rank);
    for (auto& e : shape) e = r.u32("extent");
    if (shape != p.tensor.shape())
      throw FormatError("parameter '" + name + "' has shape " + shape_string(shape) + ", model expects " +
                        shape_string(p.tensor.shape()));
    Tensor<float> t = p.tensor;
    for (float& v : t.data()) v = std::bit_cast<float>(r.u32("values"));
  }
  if (r.position() != r.size())
    throw FormatError("checkpoint has " + std::to_string(r.size() - r.position()) + " trailing bytes");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> checkpoint_encode(const Model<float>& model) {
  static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
  const ModelConfig& c = model.config();
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.u32(kCheckpointVersion);
  w.text(std::string(architecture_tag(c.architecture)));
  w.u32(static_cast<std::uint32_t>(c.input_size));
  w.u32(static_cast<std::uint32_t>(c.base_width));
  w.u32(static_cast<std::uint32_t>(c.dilation));
  w.u32(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    w.text(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t e : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (float v : p.tensor.data()) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  return std::move(w.bytes);
}

Model<float> checkpoint_decode(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const Header h = read_header(r, bytes);
  auto model = Model<float>::build(h.config, 0);
  read_parameters(r, model);
  return model;
}

void checkpoint_write(const Model<float>& model, const std::filesystem::path& path) {
  const auto bytes = checkpoint_encode(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Model<float> checkpoint_read(const std::filesystem::path& path) { return checkpoint_decode(read_file(path)); }

void checkpoint_load_into(Model<float>& model, const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes);
  const Header h = read_header(r, bytes);
  const ModelConfig& want = model.config();
  if (h.config.architecture != want.architecture)
    throw FormatError("checkpoint architecture '" + h.tag + "' does not match model architecture '" +
                      std::string(architecture_tag(want.architecture)) + "'");
  if (!(h.config == want))
    throw FormatError("checkpoint configuration (N, B, d) = (" + std::to_string(h.config.input_size) + ", " +
                      std::to_string(h.config.base_width) + ", " + std::to_string(h.config.dilation) +
                      ") does not match the model");
  auto staged = Model<float>::build(want, 0);
  read_parameters(r, staged);
  for (std::size_t i = 0; i < staged.parameters().size(); ++i) {
    Tensor<float> dst = model.parameters()[i].tensor;
    const auto src = staged.parameters()[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.data().begin());
  }
}

}  // namespace mfpu
